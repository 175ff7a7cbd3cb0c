#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>

#include "zachvit/errors.h"
#include "zachvit/model.h"
#include "zachvit/rng.h"
#include "zachvit/suites.h"
#include "zachvit/synth.h"
#include "zachvit/train.h"
#include "zachvit/verify.h"

namespace zachvit::verify {

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(const char* pattern, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

Tensor random_tensor(Shape shape, Xoshiro256pp& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(element_count(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

Parameter random_param(const std::string& name, Shape shape, Xoshiro256pp& rng, double lo = -1.0, double hi = 1.0) {
  return Parameter(name, random_tensor(std::move(shape), rng, lo, hi));
}

// Projects any matrix to a scalar with fixed random row weights so every
// output element carries a distinct sensitivity.
Tensor project(const Tensor& out, const Tensor& mix) { return sum(matmul(out, mix)); }

template <class Fn>
SuiteResult timed(const std::string& name, Fn&& body) {
  const auto t0 = Clock::now();
  SuiteResult r = body();
  r.name = name;
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

void perturb(VitModel& model, Xoshiro256pp& rng, double amount) {
  for (Parameter* p : model.params().all()) {
    std::vector<double> v(p->value().values().begin(), p->value().values().end());
    for (auto& x : v) x += rng.uniform(-amount, amount);
    p->assign(v);
  }
}

double sweep_deviation(VitModel& model, std::size_t images, std::size_t permutations, std::uint64_t seed) {
  const Geometry g = model.geometry();
  Xoshiro256pp rng(seed);
  constexpr std::size_t kBatch = 10;
  double worst = 0.0;
  for (std::size_t i = 0; i < images; ++i) {
    const Tensor image = random_tensor({g.height, g.width, g.channels}, rng, 0.0, 1.0);
    const Tensor patches = extract_patches(image, g.patch_size);
    const double base = model.forward_patches(patches, 1, Mode::eval, nullptr).item();
    for (std::size_t done = 0; done < permutations; done += kBatch) {
      const std::size_t count = std::min(kBatch, permutations - done);
      std::vector<Tensor> parts;
      for (std::size_t k = 0; k < count; ++k) parts.push_back(permute_rows(patches, shuffled_indices(patches.rows(), rng)));
      const Tensor logits = model.forward_patches(stack_rows(parts), count, Mode::eval, nullptr);
      for (std::size_t k = 0; k < count; ++k) worst = std::max(worst, std::abs(logits[k] - base));
    }
  }
  return worst;
}

}  // namespace

nlohmann::json to_json(const SuiteResult& r) {
  return {{"suite", r.name},   {"passed", r.passed},   {"measured", r.measured}, {"limit", r.limit},
          {"summary", r.summary}, {"details", r.details}, {"seconds", r.seconds}};
}

SuiteResult gradcheck_suite(std::uint64_t seed) {
  return timed("gradcheck", [&] {
    Xoshiro256pp rng(seed);
    std::vector<std::pair<std::string, std::function<GradCheckReport()>>> checks;

    checks.emplace_back("matmul", [&] {
      Parameter a = random_param("a", {4, 5}, rng), b = random_param("b", {5, 3}, rng);
      const Tensor mix = random_tensor({3, 1}, rng);
      std::vector<Parameter*> ps{&a, &b};
      return check_gradients(ps, [&] { return project(matmul(a.use(), b.use()), mix); }, kGradStep);
    });
    checks.emplace_back("add/add_bias/scale", [&] {
      Parameter a = random_param("a", {3, 4}, rng), b = random_param("b", {3, 4}, rng), c = random_param("c", {4}, rng);
      const Tensor mix = random_tensor({4, 1}, rng);
      std::vector<Parameter*> ps{&a, &b, &c};
      return check_gradients(ps, [&] { return project(scale(add_bias(add(a.use(), b.use()), c.use()), -1.7), mix); },
                             kGradStep);
    });
    checks.emplace_back("add_tiled", [&] {
      Parameter x = random_param("x", {6, 3}, rng), t = random_param("t", {3, 3}, rng);
      const Tensor mix = random_tensor({3, 1}, rng);
      std::vector<Parameter*> ps{&x, &t};
      return check_gradients(ps, [&] { return project(add_tiled(x.use(), t.use()), mix); }, kGradStep);
    });
    checks.emplace_back("dense", [&] {
      Parameter x = random_param("x", {5, 4}, rng), w = random_param("w", {4, 3}, rng), b = random_param("b", {3}, rng);
      const Tensor mix = random_tensor({3, 1}, rng);
      std::vector<Parameter*> ps{&x, &w, &b};
      return check_gradients(ps, [&] { return project(dense(x.use(), w.use(), b.use()), mix); }, kGradStep);
    });
    checks.emplace_back("layer_norm", [&] {
      Parameter x = random_param("x", {4, 6}, rng, -2, 2), g = random_param("g", {6}, rng),
                b = random_param("b", {6}, rng);
      const Tensor mix = random_tensor({6, 1}, rng);
      std::vector<Parameter*> ps{&x, &g, &b};
      return check_gradients(ps, [&] { return project(layer_norm(x.use(), g.use(), b.use()), mix); }, kGradStep);
    });
    checks.emplace_back("softmax_rows", [&] {
      Parameter x = random_param("x", {4, 6}, rng, -3, 3);
      const Tensor mix = random_tensor({6, 1}, rng);
      std::vector<Parameter*> ps{&x};
      return check_gradients(ps, [&] { return project(softmax_rows(x.use()), mix); }, kGradStep);
    });
    checks.emplace_back("gelu", [&] {
      Parameter x = random_param("x", {3, 5}, rng, -3, 3);
      const Tensor mix = random_tensor({5, 1}, rng);
      std::vector<Parameter*> ps{&x};
      return check_gradients(ps, [&] { return project(gelu(x.use()), mix); }, kGradStep);
    });
    checks.emplace_back("gap", [&] {
      Parameter x = random_param("x", {6, 4}, rng);
      const Tensor mix = random_tensor({4, 1}, rng);
      std::vector<Parameter*> ps{&x};
      return check_gradients(ps, [&] { return add(project(gap(x.use(), 3), mix), project(gap(x.use()), mix)); },
                             kGradStep);
    });
    checks.emplace_back("dropout(train)", [&] {
      Parameter x = random_param("x", {4, 5}, rng);
      const Tensor mix = random_tensor({5, 1}, rng);
      std::vector<Parameter*> ps{&x};
      return check_gradients(ps, [&] {
        Xoshiro256pp mask_rng(77);
        return project(dropout(x.use(), 0.3, Mode::train, &mask_rng), mix);
      }, kGradStep);
    });
    checks.emplace_back("sigmoid_bce", [&] {
      Parameter z = random_param("z", {6, 1}, rng, -4, 4);
      const Tensor y({6, 1}, {1, 0, 1, 1, 0, 0});
      std::vector<Parameter*> ps{&z};
      return check_gradients(ps, [&] { return sigmoid_bce(z.use(), y, {0.7, 1.6}); }, kGradStep);
    });
    checks.emplace_back("attention_core", [&] {
      Parameter q = random_param("q", {6, 4}, rng), k = random_param("k", {6, 4}, rng), v = random_param("v", {6, 4}, rng);
      const Tensor mix = random_tensor({4, 1}, rng);
      std::vector<Parameter*> ps{&q, &k, &v};
      return check_gradients(ps, [&] { return project(attention_core(q.use(), k.use(), v.use(), 2, 3), mix); },
                             kGradStep);
    });
    checks.emplace_back("multi_head_attention", [&] {
      Parameter x = random_param("x", {8, 4}, rng), wq = random_param("wq", {4, 4}, rng),
                wk = random_param("wk", {4, 4}, rng), wv = random_param("wv", {4, 4}, rng),
                wo = random_param("wo", {4, 4}, rng), bo = random_param("bo", {4}, rng);
      const Tensor mix = random_tensor({4, 1}, rng);
      std::vector<Parameter*> ps{&x, &wq, &wk, &wv, &wo, &bo};
      return check_gradients(ps, [&] {
        return project(multi_head_attention(x.use(), {wq.use(), wk.use(), wv.use(), wo.use(), bo.use()}, 2, 4), mix);
      }, kGradStep);
    });
    checks.emplace_back("adaptive_add", [&] {
      ParameterStore store(seed);
      AdaptiveAdd site(store, "res");
      Parameter x = random_param("x", {3, 4}, rng), y = random_param("y", {3, 2}, rng);
      (void)site(x.value(), y.value());
      const Tensor mix = random_tensor({2, 1}, rng);
      std::vector<Parameter*> ps{&x, &y, &store.at("res/proj/W"), &store.at("res/proj/b")};
      return check_gradients(ps, [&] { return project(site(x.use(), y.use()), mix); }, kGradStep);
    });
    checks.emplace_back("zachvit_end_to_end", [&] {
      ZachVitConfig c;
      c.image_height = 48;
      c.image_width = 48;
      c.channels = 1;
      c.embed_dim = 16;
      c.block_units = {16, 8};
      c.heads_per_block = {2, 2};
      c.mlp_gelu = true;
      ZachVit model(c, seed);
      perturb(model, rng, 0.1);
      std::vector<Tensor> images{random_tensor({48, 48, 1}, rng, 0, 1), random_tensor({48, 48, 1}, rng, 0, 1)};
      const Tensor labels({2, 1}, {1.0, 0.0});
      auto ps = model.params().all();
      return check_gradients(ps, [&] { return sigmoid_bce(model.forward(images, Mode::eval, nullptr), labels, {0.8, 1.3}); },
                             kGradStep);
    });
    checks.emplace_back("minimal_vit_end_to_end", [&] {
      MinimalVitConfig c;
      c.image_height = 32;
      c.image_width = 32;
      c.channels = 1;
      c.embed_dim = 8;
      c.depth = 2;
      c.heads = 2;
      c.mlp_dim = 12;
      MinimalVit model(c, seed);
      perturb(model, rng, 0.1);
      std::vector<Tensor> images{random_tensor({32, 32, 1}, rng, 0, 1)};
      const Tensor labels({1, 1}, {1.0});
      auto ps = model.params().all();
      return check_gradients(ps, [&] { return sigmoid_bce(model.forward(images, Mode::eval, nullptr), labels); },
                             kGradStep);
    });

    SuiteResult r;
    r.limit = kGradTolerance;
    std::string worst_name;
    for (auto& [name, run] : checks) {
      const GradCheckReport rep = run();
      r.details[name] = {{"max_rel_error", rep.max_rel_error}, {"worst", rep.worst}, {"elements", rep.elements}};
      if (rep.max_rel_error >= r.measured) {
        r.measured = rep.max_rel_error;
        worst_name = name + ":" + rep.worst;
      }
    }
    r.passed = r.measured <= kGradTolerance;
    r.summary = std::to_string(checks.size()) + " checks, max relative error " + fmt("%.3e", r.measured) + " (" +
                worst_name + ")";
    return r;
  });
}

SuiteResult perm_invariance_suite(std::size_t images, std::size_t permutations, std::uint64_t seed) {
  return timed("perm-invariance", [&] {
    ZachVit model(ZachVitConfig{}, seed);
    SuiteResult r;
    r.limit = kInvarianceTolerance;
    r.measured = sweep_deviation(model, images, permutations, seed);
    r.passed = r.measured <= kInvarianceTolerance;
    r.details = {{"images", images}, {"permutations", permutations}, {"model", "zachvit"}};
    r.summary = "ZACH-ViT max logit deviation " + fmt("%.3e", r.measured) + " over " + std::to_string(images) +
                " images x " + std::to_string(permutations) + " patch permutations";
    return r;
  });
}

SuiteResult baseline_contrast_suite(std::size_t images, std::size_t permutations, std::uint64_t seed) {
  return timed("baseline-contrast", [&] {
    MinimalVit model(MinimalVitConfig{}, seed);
    SuiteResult r;
    r.limit = kBaselineMinDeviation;
    r.measured = sweep_deviation(model, images, permutations, seed);
    r.passed = r.measured > kBaselineMinDeviation;
    r.details = {{"images", images}, {"permutations", permutations}, {"model", "minimal-vit"}};
    r.summary = "Minimal ViT max logit deviation " + fmt("%.3e", r.measured) + " under the same sweep";
    return r;
  });
}

SuiteResult view_invariance_suite(std::uint64_t seed) {
  return timed("view-invariance", [&] {
    SynthSpec spec;
    spec.frames_per_video = 8;
    ExamRecord exam = generate_exam(1, SubType::cpe, seed, spec);
    exam.patient_id = "probe";
    const Roi roi = default_roi(spec.frame_width, spec.frame_height);

    auto max_deviation = [&](std::size_t width, bool aligned) {
      const StrideGeometry g = StrideGeometry::make(width, 16, aligned);
      const PreparedExam prepared = prepare_exam(exam, {roi, roi, roi, roi}, PreprocessOptions::for_geometry(g));
      ZachVitConfig c;
      c.image_width = g.width;
      c.image_height = g.height();
      c.channels = 1;
      ZachVit model(c, seed);
      std::vector<Tensor> images;
      for (const auto& order : view_permutations()) {
        const FloatImage vis = exam_to_vis(prepared.views, order, g);
        images.push_back(gray_to_image(vis.pixels, vis.height, vis.width, 1));
      }
      const Tensor logits = model.forward(images, Mode::eval, nullptr);
      double worst = 0.0;
      for (std::size_t i = 1; i < logits.size(); ++i) worst = std::max(worst, std::abs(logits[i] - logits[0]));
      return worst;
    };

    // Aligned bands: 32 rows at width 112, 64 rows at width 224.
    // Quarter-height bands: 28 rows at width 112, 56 rows at width 224.
    const double aligned_112 = max_deviation(112, true);
    const double aligned_224 = max_deviation(224, true);
    const double quarter_112 = max_deviation(112, false);
    const double quarter_224 = max_deviation(224, false);
    SuiteResult r;
    r.limit = kInvarianceTolerance;
    r.measured = std::max(aligned_112, aligned_224);
    r.passed = r.measured <= kInvarianceTolerance;
    r.details = {{"aligned_112_max_deviation", aligned_112}, {"aligned_224_max_deviation", aligned_224},
                 {"quarter_112_max_deviation", quarter_112}, {"quarter_224_max_deviation", quarter_224}, {"orders", 24}};
    r.summary = "aligned max deviation " + fmt("%.3e", r.measured) + " (32- and 64-row bands); quarter-height bands " +
                fmt("%.3e", quarter_224) + " at 56-row bands, " + fmt("%.3e", quarter_112) +
                " at 28-row bands (reported only)";
    return r;
  });
}

SuiteResult params_suite() {
  return timed("params", [&] {
    ZachVit zach(ZachVitConfig{}, 0);
    MinimalVit minimal(MinimalVitConfig{}, 0);
    const auto z = static_cast<double>(zach.param_count());
    const auto m = static_cast<double>(minimal.param_count());
    const double ratio = z / m;
    SuiteResult r;
    r.measured = z;
    r.limit = 275000;
    const bool z_ok = z >= 225000 && z <= 275000;
    const bool m_ok = m >= 558000 && m <= 682000;
    r.passed = z_ok && m_ok && ratio <= 0.5;
    r.details = {{"zachvit", zach.param_count()}, {"minimal_vit", minimal.param_count()}, {"ratio", ratio},
                 {"zachvit_band", {225000, 275000}}, {"minimal_vit_band", {558000, 682000}}, {"max_ratio", 0.5}};
    r.summary = "ZACH-ViT " + std::to_string(zach.param_count()) + ", Minimal ViT " +
                std::to_string(minimal.param_count()) + ", ratio " + fmt("%.3f", ratio);
    return r;
  });
}

SuiteResult auc_oracle_suite(std::size_t instances, std::uint64_t seed) {
  return timed("auc-oracle", [&] {
    Xoshiro256pp rng(seed);
    double worst = 0.0;
    std::size_t tied_instances = 0;
    for (std::size_t t = 0; t < instances; ++t) {
      const auto n = static_cast<std::size_t>(rng.between(2, 200));
      const auto levels = static_cast<std::uint64_t>(rng.between(2, 50));
      std::vector<double> s(n);
      std::vector<int> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = static_cast<double>(rng.below(levels)) / static_cast<double>(levels);
        y[i] = rng.bernoulli(rng.uniform(0.2, 0.8)) ? 1 : 0;
      }
      y[0] = 0;
      y[n - 1] = 1;
      tied_instances += std::set<double>(s.begin(), s.end()).size() < n;
      worst = std::max(worst, std::abs(roc_auc(s, y) - pairwise_auc(s, y)));
    }
    SuiteResult r;
    r.limit = kAucTolerance;
    r.measured = worst;
    r.passed = worst <= kAucTolerance;
    r.details = {{"instances", instances}, {"instances_with_ties", tied_instances}};
    r.summary = std::to_string(instances) + " instances, max |trapezoid - concordance| " + fmt("%.3e", worst);
    return r;
  });
}

SuiteResult ssda_cardinality_suite(std::uint64_t seed) {
  return timed("ssda-cardinality", [&] {
    SynthSpec spec;
    spec.frames_per_video = 6;
    ExamRecord exam = generate_exam(0, SubType::ncip, seed, spec);
    exam.patient_id = "probe";
    const Roi roi = default_roi(spec.frame_width, spec.frame_height);
    const StrideGeometry g = StrideGeometry::make(112, 16, false);
    const PreparedExam prepared = prepare_exam(exam, {roi, roi, roi, roi}, PreprocessOptions::for_geometry(g));

    SuiteResult r;
    bool ok = true;
    nlohmann::json counts = nlohmann::json::array();
    for (std::size_t k = 0; k <= kPrimeSeeds.size(); ++k) {
      RegimeSpec regime;
      regime.mode = RegimeMode::ssda;
      regime.seeds.assign(kPrimeSeeds.begin(), kPrimeSeeds.begin() + static_cast<std::ptrdiff_t>(k));
      const auto images = ssda_expand(prepared, regime, g);
      counts.push_back({{"seeds", k}, {"images", images.size()}, {"expected", 24 * (1 + k)}});
      ok = ok && images.size() == 24 * (1 + k);
      for (std::size_t block = 0; block <= k; ++block) {
        std::set<ViewOrder> orders;
        for (std::size_t i = 0; i < 24; ++i) orders.insert(images[block * 24 + i].provenance.permutation);
        ok = ok && orders.size() == 24;
      }
    }
    const std::vector<ViewOrder> perms = view_permutations();
    const bool s4 = perms.size() == 24 && std::set<ViewOrder>(perms.begin(), perms.end()).size() == 24;

    RegimeSpec all = RegimeSpec::parse("ssda:all");
    const auto a = ssda_expand(prepared, all, g);
    const auto b = ssda_expand(prepared, all, g);
    bool identical = a.size() == b.size();
    for (std::size_t i = 0; identical && i < a.size(); ++i) {
      identical = encode_pgm(quantize(a[i].pixels)) == encode_pgm(quantize(b[i].pixels)) &&
                  a[i].provenance == b[i].provenance;
    }
    std::set<std::vector<double>> distinct;
    for (std::size_t i = 0; i < 24; ++i) distinct.insert(a[i].pixels.pixels);

    r.passed = ok && s4 && identical && distinct.size() == 24;
    r.measured = static_cast<double>(a.size());
    r.limit = 264;
    r.details = {{"counts", counts}, {"s4_exact", s4}, {"rerun_identical", identical},
                 {"distinct_zero_seed_images", distinct.size()}};
    r.summary = std::string("24(1+k) for k=0..10: ") + (ok ? "ok" : "MISMATCH") + ", S4 " + (s4 ? "exact" : "wrong") +
                ", reruns " + (identical ? "byte-identical" : "DIFFER") + ", " + std::to_string(distinct.size()) +
                "/24 distinct";
    return r;
  });
}

SuiteResult threshold_suite() {
  return timed("threshold", [&] {
    const FloatImage below = threshold_frame(GrayImage(16, 16, 92));
    const FloatImage at = threshold_frame(GrayImage(16, 16, 93));
    bool zero = std::all_of(below.pixels.begin(), below.pixels.end(), [](double v) { return v == 0.0; });
    bool kept = std::all_of(at.pixels.begin(), at.pixels.end(), [](double v) { return v == 93.0 / 255.0; });
    Xoshiro256pp rng(5);
    bool idempotent = true;
    for (int trial = 0; trial < 20; ++trial) {
      GrayImage im(32, 32);
      for (auto& p : im.pixels) p = static_cast<std::uint8_t>(rng.below(256));
      const FloatImage once = threshold_frame(im);
      idempotent = idempotent && threshold_normalized(once) == once;
    }
    SuiteResult r;
    r.passed = zero && kept && idempotent;
    r.measured = at.pixels[0];
    r.limit = 93.0 / 255.0;
    r.details = {{"92_maps_to_zero", zero}, {"93_maps_to_93_over_255", kept}, {"idempotent", idempotent}};
    r.summary = std::string("92 -> 0: ") + (zero ? "yes" : "NO") + ", 93 -> " + fmt("%.6f", r.measured) +
                ", idempotent: " + (idempotent ? "yes" : "NO");
    return r;
  });
}

SuiteResult class_weight_suite() {
  return timed("class-weights", [&] {
    std::vector<int> labels(61, 0);
    std::fill_n(labels.begin(), 18, 1);
    const ClassWeights w = class_weights(labels);
    const double w0 = std::round(w.negative * 1e4) / 1e4;
    const double w1 = std::round(w.positive * 1e4) / 1e4;
    SuiteResult r;
    r.passed = w0 == 0.7093 && w1 == 1.6944;
    r.measured = w.positive;
    r.limit = 1.6944;
    r.details = {{"w0", w.negative}, {"w1", w.positive}, {"negatives", 43}, {"positives", 18}};
    r.summary = "43/18 -> w0 " + fmt("%.4f", w.negative) + ", w1 " + fmt("%.4f", w.positive);
    return r;
  });
}

std::vector<std::string> suite_names() {
  return {"gradcheck", "perm-invariance", "baseline-contrast", "view-invariance", "params",
          "auc-oracle", "ssda-cardinality", "threshold", "class-weights"};
}

SuiteResult run_suite(const std::string& name, std::uint64_t seed) {
  if (name == "gradcheck") return gradcheck_suite(seed);
  if (name == "perm-invariance") return perm_invariance_suite(20, 100, seed);
  if (name == "baseline-contrast") return baseline_contrast_suite(20, 100, seed);
  if (name == "view-invariance") return view_invariance_suite(seed);
  if (name == "params") return params_suite();
  if (name == "auc-oracle") return auc_oracle_suite(200, seed);
  if (name == "ssda-cardinality") return ssda_cardinality_suite(seed);
  if (name == "threshold") return threshold_suite();
  if (name == "class-weights") return class_weight_suite();
  throw ConfigError("unknown suite '" + name + "'");
}

}  // namespace zachvit::verify
