#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "zachvit/errors.h"
#include "zachvit/rng.h"
#include "zachvit/train.h"
#include "zachvit/verify.h"

using namespace zachvit;
namespace fs = std::filesystem;

namespace {

ZachVitConfig tiny_config() {
  ZachVitConfig c;
  c.image_height = 32;
  c.image_width = 32;
  c.channels = 1;
  c.patch_size = 8;
  c.embed_dim = 16;
  c.block_units = {16, 8};
  c.heads_per_block = {2, 2};
  return c;
}

// Label-1 images carry a bright vertical bar; label-0 images a horizontal one.
StrideSet toy_set(std::size_t n, std::uint64_t seed) {
  Xoshiro256pp rng(seed);
  StrideSet set;
  set.width = 32;
  set.height = 32;
  for (std::size_t i = 0; i < n; ++i) {
    StrideSample s;
    s.label = static_cast<int>(i % 2);
    s.pixels.resize(32 * 32);
    for (auto& p : s.pixels) p = static_cast<std::uint8_t>(rng.below(60));
    const auto at = static_cast<std::size_t>(rng.between(4, 27));
    for (std::size_t k = 0; k < 32; ++k) {
      for (std::size_t d = 0; d < 3; ++d) {
        const std::size_t idx = s.label ? k * 32 + at + d : (at + d) * 32 + k;
        s.pixels[idx] = 220;
      }
    }
    s.file = "toy" + std::to_string(i);
    set.samples.push_back(std::move(s));
  }
  return set;
}

std::vector<std::uint8_t> file_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("zachvit_train_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<double> all_values(const VitModel& m) {
  std::vector<double> out;
  for (const Parameter* p : m.params().all()) out.insert(out.end(), p->value().values().begin(), p->value().values().end());
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// AUC

TEST(RocAuc, PerfectSeparationIsOne) {
  const std::vector<double> s = {0.1, 0.2, 0.8, 0.9};
  const std::vector<int> y = {0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(roc_auc(s, y), 1.0);
}

TEST(RocAuc, AllTiedScoresGiveHalf) {
  const std::vector<double> s(10, 0.3);
  const std::vector<int> y = {0, 1, 0, 1, 1, 0, 0, 0, 1, 0};
  EXPECT_DOUBLE_EQ(roc_auc(s, y), 0.5);
}

TEST(RocAuc, SmallHandCase) {
  const std::vector<double> s = {0.9, 0.4, 0.5, 0.1};
  const std::vector<int> y = {1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(roc_auc(s, y), 0.75);
  EXPECT_DOUBLE_EQ(verify::pairwise_auc(s, y), 0.75);
}

TEST(RocAuc, SingleClassIsUndefined) {
  const std::vector<double> s = {0.1, 0.2};
  EXPECT_THROW(roc_auc(s, std::vector<int>{1, 1}), UndefinedMetricError);
  EXPECT_THROW(roc_auc(s, std::vector<int>{0, 0}), UndefinedMetricError);
}

TEST(RocAuc, MatchesPairwiseConcordanceWithTies) {
  Xoshiro256pp rng(21);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(rng.between(2, 200));
    std::vector<double> s(n);
    std::vector<int> y(n);
    // Coarse score grid forces many ties.
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(12)) / 11.0;
      y[i] = rng.bernoulli(0.4);
    }
    y[0] = 0;
    y[1] = 1;
    worst = std::max(worst, std::abs(roc_auc(s, y) - verify::pairwise_auc(s, y)));
  }
  EXPECT_LE(worst, 1e-9);
}

// ---------------------------------------------------------------------------
// Threshold metrics

TEST(Metrics, AllCorrect) {
  const std::vector<double> p = {0.9, 0.1, 0.7, 0.2};
  const std::vector<int> y = {1, 0, 1, 0};
  const auto m = compute_metrics(p, y, 0.5);
  EXPECT_EQ(m.sensitivity, 1.0);
  EXPECT_EQ(m.specificity, 1.0);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.f1, 1.0);
}

TEST(Metrics, AllPredictedNegativeIsTrivialSignature) {
  const std::vector<double> p = {0.2, 0.1, 0.3, 0.2};
  const std::vector<int> y = {1, 0, 1, 0};
  const auto m = compute_metrics(p, y, 0.5);
  EXPECT_EQ(m.sensitivity, 0.0);
  EXPECT_EQ(m.specificity, 1.0);
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.accuracy, 0.5);
}

TEST(Metrics, ThresholdZeroPredictsEverythingPositive) {
  const std::vector<double> p = {0.0, 0.1, 0.3, 0.2};
  const std::vector<int> y = {1, 0, 1, 0};
  const auto m = compute_metrics(p, y, 0.0);
  EXPECT_EQ(m.sensitivity, 1.0);
  EXPECT_EQ(m.specificity, 0.0);
}

TEST(Metrics, ConsistencyAndThresholdMonotonicity) {
  Xoshiro256pp rng(22);
  std::vector<double> p(60);
  std::vector<int> y(60);
  for (std::size_t i = 0; i < p.size(); ++i) {
    y[i] = i % 3 == 0;
    p[i] = std::clamp(0.3 * y[i] + rng.uniform(0.0, 0.7), 0.0, 1.0);
  }
  double prev_sens = 2.0, prev_spec = -1.0;
  for (int k = 0; k <= 20; ++k) {
    const auto m = compute_metrics(p, y, k / 20.0);
    const auto& c = m.confusion;
    EXPECT_EQ(c.total(), 60u);
    EXPECT_DOUBLE_EQ(m.accuracy, static_cast<double>(c.tp + c.tn) / 60.0);
    if (m.precision + m.sensitivity > 0) {
      EXPECT_NEAR(m.f1, 2 * m.precision * m.sensitivity / (m.precision + m.sensitivity), 1e-12);
    }
    EXPECT_LE(m.sensitivity, prev_sens);
    EXPECT_GE(m.specificity, prev_spec);
    prev_sens = m.sensitivity;
    prev_spec = m.specificity;
  }
}

// ---------------------------------------------------------------------------
// Adam and class weights

TEST(Adam, ZeroGradientLeavesParametersAndDecaysMoments) {
  Parameter p("w", Tensor::vector({1.0, -2.0}));
  std::vector<Parameter*> ps = {&p};
  AdamState st;
  st.m = {{0.5, 0.5}};
  st.v = {{0.25, 0.25}};
  p.zero_grad();
  adam_step(ps, st, 3, {});
  // Moments decay; the update is lr * m_hat / sqrt(v_hat), nonzero from the
  // old momentum, so only the decay is checked for the moments.
  EXPECT_DOUBLE_EQ(st.m[0][0], 0.45);
  EXPECT_DOUBLE_EQ(st.v[0][0], 0.25 * 0.999);
  Parameter q("w", Tensor::vector({1.0, -2.0}));
  std::vector<Parameter*> qs = {&q};
  AdamState fresh;
  q.zero_grad();
  adam_step(qs, fresh, 1, {});
  EXPECT_EQ(q.value()[0], 1.0);
  EXPECT_EQ(q.value()[1], -2.0);
}

TEST(Adam, MatchesScalarOracle) {
  const AdamConfig cfg{1e-3, 0.9, 0.999, 1e-8};
  const std::vector<double> grads = {0.5, -0.3, 0.8, 0.0, 2.0};
  Parameter p("x", Tensor::vector({0.7}));
  std::vector<Parameter*> ps = {&p};
  AdamState st;
  double x = 0.7, m = 0.0, v = 0.0;
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    const double g = grads[t - 1];
    p.grad()[0] = g;
    adam_step(ps, st, static_cast<long>(t), cfg);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= 1e-3 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(p.value()[0], x, 1e-15) << "step " << t;
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Parameter p("x", Tensor::vector({0.0, 0.0}));
  std::vector<Parameter*> ps = {&p};
  AdamState st;
  p.grad() = {3.0, -0.01};
  adam_step(ps, st, 1, {1e-4, 0.9, 0.999, 1e-8});
  EXPECT_NEAR(p.value()[0], -1e-4, 1e-11);
  EXPECT_NEAR(p.value()[1], 1e-4, 1e-9);
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  Parameter a("block0/attn/Wq", Tensor::vector({1.0}));
  Parameter b("head/W", Tensor::vector({1.0, 2.0}));
  std::vector<Parameter*> ps = {&a, &b};
  a.grad()[0] = 0.1;
  b.grad()[1] = std::nan("");
  AdamState st;
  try {
    adam_step(ps, st, 1, {});
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("head/W"), std::string::npos);
  }
  EXPECT_EQ(a.value()[0], 1.0);
}

TEST(ClassWeights, ReferenceTrainingCounts) {
  std::vector<int> y(61, 0);
  std::fill_n(y.begin(), 18, 1);
  const auto w = class_weights(y);
  EXPECT_DOUBLE_EQ(w.negative, 61.0 / 86.0);
  EXPECT_DOUBLE_EQ(w.positive, 61.0 / 36.0);
  EXPECT_NEAR(w.negative, 0.7093, 5e-5);
  EXPECT_NEAR(w.positive, 1.6944, 5e-5);
  std::reverse(y.begin(), y.end());
  const auto r = class_weights(y);
  EXPECT_EQ(r.negative, w.negative);
  EXPECT_EQ(r.positive, w.positive);
}

TEST(ClassWeights, BalancedAndSingleClass) {
  const auto w = class_weights(std::vector<int>{0, 1, 1, 0});
  EXPECT_EQ(w.negative, 1.0);
  EXPECT_EQ(w.positive, 1.0);
  EXPECT_THROW(class_weights(std::vector<int>{1, 1, 1}), ConfigError);
}

// ---------------------------------------------------------------------------
// Data

TEST(BatchPatches, MatchesImagePatchExtraction) {
  const StrideSet set = toy_set(3, 5);
  for (std::size_t channels : {1u, 3u}) {
    const Geometry g{32, 32, channels, 8};
    const std::vector<std::size_t> idx = {2, 0};
    const Tensor batch = batch_patches(set, idx, g);
    std::vector<Tensor> parts;
    for (auto i : idx) {
      std::vector<double> gray(set.samples[i].pixels.begin(), set.samples[i].pixels.end());
      for (auto& v : gray) v /= 255.0;
      parts.push_back(extract_patches(gray_to_image(gray, 32, 32, channels), 8));
    }
    const Tensor expected = stack_rows(parts);
    ASSERT_EQ(batch.shape(), expected.shape());
    for (std::size_t i = 0; i < batch.size(); ++i) ASSERT_EQ(batch[i], expected[i]);
  }
}

TEST(Evaluate, GeometryMismatchIsConfigError) {
  ZachVit model(tiny_config(), 1);
  StrideSet set = toy_set(4, 1);
  set.height = 40;
  EXPECT_THROW(evaluate(model, set, 0.5), ConfigError);
}

// ---------------------------------------------------------------------------
// Training loop

TEST(Train, ConfigValidation) {
  TrainConfig c;
  c.early_stop_patience = 30;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.learning_rate = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(train_config_from_json(to_json(TrainConfig{})).max_epochs, 23);
  EXPECT_THROW(train_config_from_json({{"class_weighting", "sometimes"}}), ConfigError);
}

TEST(Train, ZeroLearningRateFreezesParameters) {
  ZachVit model(tiny_config(), 3);
  const auto before = all_values(model);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.max_epochs = 3;
  cfg.early_stop_patience = 3;
  const auto dir = temp_dir("lr0");
  const auto r = train_model(model, toy_set(16, 1), toy_set(8, 2), cfg, dir);
  EXPECT_EQ(all_values(model), before);
  ASSERT_GE(r.history.size(), 2u);
  for (const auto& e : r.history) {
    EXPECT_EQ(e.val_loss, r.history[0].val_loss);
    EXPECT_EQ(e.val_auc, r.history[0].val_auc);
  }
  fs::remove_all(dir);
}

TEST(Train, PatienceZeroStopsAfterFirstNonImprovingEpoch) {
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.max_epochs = 10;
  cfg.early_stop_patience = 0;
  const auto dir = temp_dir("patience");
  ZachVit a(tiny_config(), 3);
  auto r = train_model(a, toy_set(8, 1), toy_set(8, 2), cfg, dir);
  EXPECT_EQ(r.history.size(), 2u);
  EXPECT_TRUE(r.stopped_early);
  EXPECT_EQ(r.best_epoch, 1);
  cfg.early_stop_patience = 3;
  ZachVit b(tiny_config(), 3);
  r = train_model(b, toy_set(8, 1), toy_set(8, 2), cfg, dir);
  EXPECT_EQ(r.history.size(), 4u);
  fs::remove_all(dir);
}

TEST(Train, LearnsToyTaskAndRestoresBestWeights) {
  TrainConfig cfg;
  cfg.learning_rate = 3e-3;
  cfg.max_epochs = 12;
  cfg.batch_size = 8;
  const auto dir = temp_dir("learn");
  ZachVit model(tiny_config(), 4);
  const StrideSet val = toy_set(16, 8);
  const auto r = train_model(model, toy_set(48, 7), val, cfg, dir);
  const auto& best = r.history[static_cast<std::size_t>(r.best_epoch - 1)];
  for (const auto& e : r.history) EXPECT_GE(e.val_loss, best.val_loss);
  EXPECT_GT(best.val_auc, 0.9);
  EXPECT_NEAR(evaluate(model, val, 0.5).loss, best.val_loss, 1e-12);
  auto reloaded = load_checkpoint(r.best_checkpoint.string());
  EXPECT_EQ(all_values(*reloaded), all_values(model));
  EXPECT_EQ(read_checkpoint_manifest(r.best_checkpoint.string()).at("extra").at("epoch"), r.best_epoch);
  EXPECT_TRUE(fs::exists(r.peak_checkpoint));
  fs::remove_all(dir);
}

TEST(Train, IdenticalRunsAreBitIdentical) {
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.max_epochs = 3;
  cfg.early_stop_patience = 3;
  const auto d1 = temp_dir("det1"), d2 = temp_dir("det2");
  ZachVit a(tiny_config(), 5), b(tiny_config(), 5);
  train_model(a, toy_set(20, 1), toy_set(8, 2), cfg, d1);
  train_model(b, toy_set(20, 1), toy_set(8, 2), cfg, d2);
  EXPECT_EQ(file_bytes(d1 / "best.ckpt"), file_bytes(d2 / "best.ckpt"));
  EXPECT_EQ(file_bytes(d1 / "curves.csv"), file_bytes(d2 / "curves.csv"));
  EXPECT_EQ(all_values(a), all_values(b));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST(Train, NonFiniteLossAbortsAndKeepsLastGoodCheckpoint) {
  TrainConfig cfg;
  cfg.max_epochs = 4;
  cfg.early_stop_patience = 4;
  const auto dir = temp_dir("nan");
  ZachVit model(tiny_config(), 6);
  auto poison = [&](const EpochRecord&) {
    Parameter& w = model.params().at("head/W");
    std::vector<double> bad(w.size(), std::numeric_limits<double>::infinity());
    w.assign(bad);
  };
  EXPECT_THROW(train_model(model, toy_set(8, 1), toy_set(8, 2), cfg, dir, poison), NumericError);
  ASSERT_TRUE(fs::exists(dir / "best.ckpt"));
  auto good = load_checkpoint((dir / "best.ckpt").string());
  for (double v : good->params().at("head/W").value().values()) EXPECT_TRUE(std::isfinite(v));
  fs::remove_all(dir);
}
