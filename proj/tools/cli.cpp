#include "cli.h"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "svg.h"
#include "zachvit/errors.h"
#include "zachvit/model.h"
#include "zachvit/suites.h"
#include "zachvit/synth.h"
#include "zachvit/train.h"

namespace zachvit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "zachvit " ZACHVIT_VERSION;

unsigned default_threads() {
  if (const char* env = std::getenv("ZACHVIT_THREADS")) {
    try {
      const long n = std::stol(env);
      if (n >= 1) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("ZACHVIT_THREADS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw InputError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::string fixed(double v, int digits = 6) {
  if (std::isnan(v)) return "";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Paths to an augmented dataset may name the directory or its manifest.
fs::path dataset_manifest_path(const fs::path& p) { return fs::is_directory(p) ? p / "manifest.json" : p; }

// State shared by all subcommands.
struct Context {
  std::ostream& out;
  std::ostream& err;
  std::vector<std::string> argv;
  bool dry_run = false;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  RunManifest manifest(const std::string& command, json config) const {
    RunManifest m;
    m.command = command;
    m.argv = argv;
    m.config = std::move(config);
    return m;
  }

  void finish(RunManifest& m, const fs::path& out_dir) const {
    m.add_outputs(out_dir);
    m.duration_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    m.write(out_dir);
  }

  bool print_dry_run(const json& config) const {
    if (dry_run) out << config.dump(2) << "\n";
    return dry_run;
  }
};

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::optional<std::size_t> patients;
  std::optional<double> prevalence;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> frames;
  std::optional<std::size_t> frame_size;
  std::optional<double> noise;
  std::string config;
  std::string out;
  std::optional<unsigned> threads;
};

int cmd_synth(const SynthArgs& a, Context& ctx) {
  SynthSpec spec;
  if (!a.config.empty()) spec = synth_spec_from_json(read_json(a.config));
  if (a.patients) spec.n_patients = *a.patients;
  if (a.prevalence) spec.prevalence = *a.prevalence;
  if (a.seed) spec.master_seed = *a.seed;
  if (a.frames) spec.frames_per_video = *a.frames;
  if (a.frame_size) spec.frame_width = spec.frame_height = *a.frame_size;
  if (a.noise) spec.noise_level = *a.noise;
  spec.validate();
  const SplitPlan plan = plan_splits(spec.n_patients, spec.prevalence);
  const unsigned threads = a.threads.value_or(default_threads());
  const json config = {{"synth", to_json(spec)}, {"threads", threads}, {"out", a.out}};
  if (ctx.print_dry_run(config)) return kOk;

  RunManifest run = ctx.manifest("synth", config);
  if (!a.config.empty()) run.add_input(a.config);
  const DatasetManifest m = generate_dataset(spec, a.out, threads);
  ctx.out << "wrote " << m.patients.size() << " patients to " << a.out << " (train/val/test " << plan.sizes[0] << "/"
          << plan.sizes[1] << "/" << plan.sizes[2] << ", positives " << plan.positives[0] << "/" << plan.positives[1]
          << "/" << plan.positives[2] << ")\n";
  ctx.finish(run, a.out);
  return kOk;
}

// ---------------------------------------------------------------------------
// augment

struct AugmentArgs {
  std::string manifest;
  std::string regime;
  bool aligned = false;
  std::size_t width = 112;
  std::size_t patch_size = 16;
  int threshold = kDefaultThreshold;
  std::string out;
  std::optional<unsigned> threads;
};

int cmd_augment(const AugmentArgs& a, Context& ctx) {
  ExpandOptions opts;
  opts.geometry = StrideGeometry::make(a.width, a.patch_size, a.aligned);
  opts.regime = RegimeSpec::parse(a.regime);
  opts.preprocess = PreprocessOptions::for_geometry(opts.geometry);
  opts.preprocess.threshold = a.threshold;
  opts.threads = a.threads.value_or(default_threads());
  const json config = {{"manifest", a.manifest},
                       {"regime", opts.regime.tag()},
                       {"images_per_training_exam", opts.regime.expansion_factor()},
                       {"geometry", to_json(opts.geometry)},
                       {"preprocess",
                        {{"threshold", opts.preprocess.threshold},
                         {"frame_width", opts.preprocess.frame_width},
                         {"frame_height", opts.preprocess.frame_height}}},
                       {"threads", opts.threads},
                       {"out", a.out}};
  if (!fs::exists(a.manifest)) throw InputError("dataset manifest not found: " + a.manifest);
  if (ctx.print_dry_run(config)) return kOk;

  RunManifest run = ctx.manifest("augment", config);
  run.add_input(a.manifest);
  const AugmentedManifest m = expand_dataset(a.manifest, opts, a.out);
  std::map<std::string, std::size_t> per_split;
  for (const auto& e : m.images) ++per_split[split_name(e.split)];
  ctx.out << "wrote " << m.images.size() << " stride images (" << m.geometry.width << "x" << m.geometry.height()
          << ", regime " << m.regime << "): train " << per_split["train"] << ", val " << per_split["val"] << ", test "
          << per_split["test"] << "\n";
  ctx.finish(run, a.out);
  return kOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string manifest;
  std::string model = "zachvit";
  std::string config;
  std::string out;
  std::optional<double> lr;
  std::optional<int> epochs;
  std::optional<int> patience;
  std::optional<std::size_t> batch_size;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> class_weighting;
  std::optional<double> threshold;
};

json default_model_config(const std::string& kind, const StrideGeometry& g) {
  json j;
  if (kind == "zachvit") {
    ZachVitConfig c;
    c.image_width = g.width;
    c.image_height = g.height();
    c.patch_size = g.patch_size;
    c.channels = 1;
    j = c;
  } else if (kind == "minimal-vit") {
    MinimalVitConfig c;
    c.image_width = g.width;
    c.image_height = g.height();
    c.patch_size = g.patch_size;
    c.channels = 1;
    j = c;
  } else {
    throw ConfigError("unknown model '" + kind + "' (expected zachvit or minimal-vit)");
  }
  return j;
}

int cmd_train(const TrainArgs& a, Context& ctx) {
  const fs::path manifest_path = dataset_manifest_path(a.manifest);
  if (!fs::exists(manifest_path)) throw InputError("augmented manifest not found: " + manifest_path.string());
  const AugmentedManifest manifest = AugmentedManifest::load(manifest_path);

  const json file = a.config.empty() ? json::object() : read_json(a.config);
  TrainConfig tc = train_config_from_json(file.value("train", json::object()));
  if (a.lr) tc.learning_rate = *a.lr;
  if (a.epochs) tc.max_epochs = *a.epochs;
  if (a.patience) tc.early_stop_patience = *a.patience;
  if (a.batch_size) tc.batch_size = *a.batch_size;
  if (a.seed) tc.seed = *a.seed;
  if (a.class_weighting) {
    if (*a.class_weighting != "auto" && *a.class_weighting != "off") throw ConfigError("--class-weighting must be auto or off");
    tc.class_weighting = *a.class_weighting == "auto";
  }
  if (a.threshold) tc.eval_threshold = *a.threshold;
  tc.validate();
  json model_config = default_model_config(a.model, manifest.geometry);
  if (file.contains(a.model)) model_config.merge_patch(file.at(a.model));
  if (file.contains("model")) model_config.merge_patch(file.at("model"));

  const json config = {{"model_kind", a.model}, {"model", model_config}, {"train", to_json(tc)},
                       {"data", {{"manifest", manifest_path.string()}, {"regime", manifest.regime},
                                 {"geometry", to_json(manifest.geometry)}}},
                       {"out", a.out}};
  auto model = make_model(a.model, model_config, tc.seed);
  if (ctx.print_dry_run(config)) return kOk;

  RunManifest run = ctx.manifest("train", config);
  run.add_input(manifest_path);
  if (!a.config.empty()) run.add_input(a.config);
  const fs::path dir = manifest_path.parent_path();
  const StrideSet train = load_split(manifest, dir, Split::train);
  const StrideSet val = load_split(manifest, dir, Split::val);
  ctx.out << a.model << ": " << model->param_count() << " parameters; " << train.size() << " training images, "
          << val.size() << " validation images\n";

  const TrainResult result = train_model(*model, train, val, tc, a.out, [&](const EpochRecord& e) {
    ctx.out << "epoch " << e.epoch << "  train_loss " << fixed(e.train_loss, 4) << "  train_auc " << fixed(e.train_auc, 4)
            << "  val_loss " << fixed(e.val_loss, 4) << "  val_auc " << fixed(e.val_auc, 4) << std::endl;
  });

  json history = json::array();
  for (const auto& e : result.history) {
    history.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"train_auc", e.train_auc},
                       {"val_loss", e.val_loss}, {"val_auc", e.val_auc}, {"val_metrics", to_json(e.val_metrics)}});
  }
  const auto& best = result.history[static_cast<std::size_t>(result.best_epoch - 1)];
  const auto& peak = result.history[static_cast<std::size_t>(std::max(result.peak_auc_epoch, 1) - 1)];
  const json report = {{"model", a.model},
                       {"param_count", model->param_count()},
                       {"class_weights", {{"w0", result.weights.negative}, {"w1", result.weights.positive}}},
                       {"epochs_run", result.history.size()},
                       {"stopped_early", result.stopped_early},
                       {"best_epoch", result.best_epoch},
                       {"best_val_loss", best.val_loss},
                       {"peak_auc_epoch", result.peak_auc_epoch},
                       {"peak_val_auc", peak.val_auc},
                       {"val_at_best_loss", to_json(best.val_metrics)},
                       {"val_at_peak_auc", to_json(peak.val_metrics)},
                       {"checkpoints", {{"best_loss", "best.ckpt"}, {"peak_auc", "peak_auc.ckpt"}}},
                       {"history", history}};
  write_text_atomic(fs::path(a.out) / "report.json", report.dump(2) + "\n");
  ctx.out << "best epoch " << result.best_epoch << " (val_loss " << fixed(best.val_loss, 4) << ", val_auc "
          << fixed(best.val_auc, 4) << "); peak val_auc " << fixed(peak.val_auc, 4) << " at epoch "
          << result.peak_auc_epoch << "\n";
  ctx.finish(run, a.out);
  return kOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string checkpoint;
  std::string manifest;
  std::string split = "test";
  double threshold = 0.5;
  std::string out;
};

int cmd_eval(const EvalArgs& a, Context& ctx) {
  const Split split = parse_split(a.split);
  if (!(a.threshold >= 0.0 && a.threshold <= 1.0)) throw ConfigError("--threshold must lie in [0, 1]");
  if (!fs::exists(a.checkpoint)) throw InputError("checkpoint not found: " + a.checkpoint);
  const fs::path manifest_path = dataset_manifest_path(a.manifest);
  if (!fs::exists(manifest_path)) throw InputError("augmented manifest not found: " + manifest_path.string());
  const fs::path out = a.out.empty() ? fs::path(a.checkpoint).parent_path() / ("eval_" + a.split) : fs::path(a.out);
  const json config = {{"checkpoint", a.checkpoint}, {"manifest", manifest_path.string()}, {"split", a.split},
                       {"threshold", a.threshold}, {"out", out.string()}};
  if (ctx.print_dry_run(config)) return kOk;

  RunManifest run = ctx.manifest("eval", config);
  run.add_input(a.checkpoint);
  run.add_input(manifest_path);
  auto model = load_checkpoint(a.checkpoint);
  const AugmentedManifest manifest = AugmentedManifest::load(manifest_path);
  const StrideSet set = load_split(manifest, manifest_path.parent_path(), split);
  const EvalResult r = evaluate(*model, set, a.threshold);
  fs::create_directories(out);
  json metrics = to_json(r.metrics);
  metrics["loss"] = r.loss;
  metrics["split"] = a.split;
  metrics["n"] = set.size();
  metrics["model"] = model->kind();
  write_text_atomic(out / "metrics.json", metrics.dump(2) + "\n");
  std::string csv = "file,source_patient,label,probability,predicted\n";
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& s = set.samples[i];
    csv += s.file + "," + s.source_patient + "," + std::to_string(s.label) + "," + fixed(r.probabilities[i], 10) + "," +
           (r.probabilities[i] >= a.threshold ? "1" : "0") + "\n";
  }
  write_text_atomic(out / "predictions.csv", csv);
  const auto& m = r.metrics;
  ctx.out << a.split << " (n=" << set.size() << ", threshold " << a.threshold << "): sensitivity " << fixed(m.sensitivity, 4)
          << ", specificity " << fixed(m.specificity, 4) << ", accuracy " << fixed(m.accuracy, 4) << ", f1 "
          << fixed(m.f1, 4) << ", roc_auc " << (m.roc_auc ? fixed(*m.roc_auc, 4) : "undefined") << "\n";
  ctx.finish(run, out);
  return kOk;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyArgs {
  std::string suite = "all";
  std::uint64_t seed = 1;
  std::string out = "verify_results";
};

int cmd_verify(const VerifyArgs& a, Context& ctx) {
  std::vector<std::string> names;
  if (a.suite == "all") {
    names = verify::suite_names();
  } else {
    const auto known = verify::suite_names();
    if (std::find(known.begin(), known.end(), a.suite) == known.end()) throw ConfigError("unknown suite '" + a.suite + "'");
    names = {a.suite};
  }
  const json config = {{"suites", names}, {"seed", a.seed}, {"out", a.out}};
  if (ctx.print_dry_run(config)) return kOk;

  RunManifest run = ctx.manifest("verify", config);
  json results = json::array();
  bool all_passed = true;
  for (const auto& name : names) {
    const verify::SuiteResult r = verify::run_suite(name, a.seed);
    ctx.out << (r.passed ? "PASS " : "FAIL ") << name << ": " << r.summary << " [" << fixed(r.seconds, 1) << "s]" << std::endl;
    results.push_back(verify::to_json(r));
    all_passed = all_passed && r.passed;
  }
  fs::create_directories(a.out);
  write_text_atomic(fs::path(a.out) / ("verify_" + a.suite + ".json"), results.dump(2) + "\n");
  ctx.finish(run, a.out);
  return all_passed ? kOk : kVerificationFailed;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::vector<std::string> runs;
  std::string out;
};

struct RunData {
  std::string name;
  fs::path dir;
  json report;
  std::optional<json> test;
};

std::vector<RunData> collect_runs(const std::vector<std::string>& paths) {
  std::vector<RunData> runs;
  auto add = [&](const fs::path& dir) {
    RunData r;
    r.dir = dir;
    r.name = dir.filename().string();
    if (r.name.empty()) r.name = dir.parent_path().filename().string();
    r.report = read_json(dir / "report.json");
    if (fs::exists(dir / "eval_test" / "metrics.json")) r.test = read_json(dir / "eval_test" / "metrics.json");
    runs.push_back(std::move(r));
  };
  for (const auto& p : paths) {
    const fs::path dir(p);
    if (!fs::is_directory(dir)) throw InputError("run directory not found: " + p);
    if (fs::exists(dir / "report.json")) {
      add(dir);
      continue;
    }
    // A parent directory holding several runs.
    std::vector<fs::path> children;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory() && fs::exists(e.path() / "report.json")) children.push_back(e.path());
    std::sort(children.begin(), children.end());
    for (const auto& c : children) add(c);
  }
  if (runs.empty()) throw InputError("no training runs (report.json) found under the given --runs paths");
  return runs;
}

std::string metric_cell(const json& m, const char* key) {
  if (!m.contains(key) || m.at(key).is_null()) return "";
  return fixed(m.at(key).get<double>());
}

int cmd_report(const ReportArgs& a, Context& ctx) {
  const json config = {{"runs", a.runs}, {"out", a.out}};
  if (ctx.dry_run) {
    ctx.print_dry_run(config);
    return kOk;
  }
  const auto runs = collect_runs(a.runs);
  RunManifest run = ctx.manifest("report", config);
  for (const auto& r : runs) run.add_input(r.dir / "report.json");

  static constexpr const char* kMetrics[] = {"sensitivity", "specificity", "accuracy", "f1", "roc_auc"};
  std::string table = "run,model,param_count,epochs_run,best_epoch,best_val_loss,peak_auc_epoch,peak_val_auc";
  for (const char* m : kMetrics) table += std::string(",val_") + m;
  for (const char* m : kMetrics) table += std::string(",test_") + m;
  table += "\n";
  for (const auto& r : runs) {
    const json& rep = r.report;
    table += r.name + "," + rep.at("model").get<std::string>() + "," + std::to_string(rep.at("param_count").get<long>()) +
             "," + std::to_string(rep.at("epochs_run").get<long>()) + "," + std::to_string(rep.at("best_epoch").get<long>()) +
             "," + fixed(rep.at("best_val_loss").get<double>()) + "," + std::to_string(rep.at("peak_auc_epoch").get<long>()) +
             "," + metric_cell(rep, "peak_val_auc");
    for (const char* m : kMetrics) table += "," + metric_cell(rep.at("val_at_best_loss"), m);
    for (const char* m : kMetrics) table += "," + (r.test ? metric_cell(*r.test, m) : std::string());
    table += "\n";
  }

  static constexpr const char* kCurves[] = {"train_loss", "train_auc", "val_loss", "val_auc"};
  std::size_t max_epochs = 0;
  for (const auto& r : runs) max_epochs = std::max(max_epochs, r.report.at("history").size());
  std::string curves = "epoch";
  for (const auto& r : runs)
    for (const char* c : kCurves) curves += "," + r.name + "_" + c;
  curves += "\n";
  for (std::size_t e = 0; e < max_epochs; ++e) {
    curves += std::to_string(e + 1);
    for (const auto& r : runs) {
      const json& h = r.report.at("history");
      for (const char* c : kCurves) curves += "," + (e < h.size() ? metric_cell(h[e], c) : std::string());
    }
    curves += "\n";
  }

  std::vector<Series> auc, loss;
  for (const auto& r : runs) {
    Series tr_auc{r.name + " train", {}, true}, va_auc{r.name + " val", {}, false};
    Series tr_loss{r.name + " train", {}, true}, va_loss{r.name + " val", {}, false};
    for (const auto& h : r.report.at("history")) {
      const double e = h.at("epoch").get<double>();
      auto val = [&](const char* k) { return h.at(k).is_null() ? std::nan("") : h.at(k).get<double>(); };
      tr_auc.points.emplace_back(e, val("train_auc"));
      va_auc.points.emplace_back(e, val("val_auc"));
      tr_loss.points.emplace_back(e, val("train_loss"));
      va_loss.points.emplace_back(e, val("val_loss"));
    }
    auc.push_back(tr_auc);
    auc.push_back(va_auc);
    loss.push_back(tr_loss);
    loss.push_back(va_loss);
  }

  const fs::path out(a.out);
  fs::create_directories(out);
  write_text_atomic(out / "comparison.csv", table);
  write_text_atomic(out / "curves.csv", curves);
  write_text_atomic(out / "auc.svg", line_plot_svg("ROC-AUC per epoch", "epoch", "ROC-AUC", auc));
  write_text_atomic(out / "loss.svg", line_plot_svg("Loss per epoch", "epoch", "binary cross-entropy", loss));
  ctx.out << "compared " << runs.size() << " run(s); wrote comparison.csv, curves.csv, auc.svg, loss.svg to " << a.out << "\n";
  ctx.finish(run, out);
  return kOk;
}

}  // namespace

// ---------------------------------------------------------------------------
// RunManifest

std::string sha256_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open " + path.string());
  EVP_MD_CTX* md = EVP_MD_CTX_new();
  EVP_DigestInit_ex(md, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (is.read(buf, sizeof buf) || is.gcount() > 0) EVP_DigestUpdate(md, buf, static_cast<std::size_t>(is.gcount()));
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(md, digest, &len);
  EVP_MD_CTX_free(md);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned i = 0; i < len; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 15];
  }
  return hex;
}

void RunManifest::add_input(const fs::path& p) { inputs[p.string()] = sha256_file(p); }

void RunManifest::add_outputs(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    if (name.rfind("run_", 0) == 0 && e.path().extension() == ".json") continue;
    files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) outputs[fs::relative(f, dir).generic_string()] = sha256_file(f);
}

json RunManifest::to_json() const {
  return {{"command", command}, {"argv", argv}, {"config", config}, {"inputs", inputs},
          {"outputs", outputs}, {"tool_version", kVersion}, {"duration_seconds", duration_seconds}};
}

void RunManifest::write(const fs::path& dir) const {
  fs::create_directories(dir);
  write_text_atomic(dir / ("run_" + command + ".json"), to_json().dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Entry point

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ZACH-ViT: zero-token vision transformer for lung ultrasound stride images", "zachvit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  Context ctx{out, err, args};
  app.add_flag("--dry-run", ctx.dry_run, "Print the resolved configuration and exit without side effects");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic lung-ultrasound dataset");
  s->add_option("--patients", synth.patients, "Number of patients (default 95)");
  s->add_option("--prevalence", synth.prevalence, "Fraction of label-1 patients (default 0.295)");
  s->add_option("--seed", synth.seed, "Master seed (default 1)");
  s->add_option("--frames", synth.frames, "Frames per video (default 16)");
  s->add_option("--frame-size", synth.frame_size, "Square frame size in pixels (default 112)");
  s->add_option("--noise", synth.noise, "Additive noise level (default 0.05)");
  s->add_option("--config", synth.config, "JSON file with synth spec fields");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--threads", synth.threads, "Worker threads (default $ZACHVIT_THREADS or 1)");

  AugmentArgs aug;
  auto* g = app.add_subcommand("augment", "Preprocess exams and materialize stride images");
  g->add_option("--manifest", aug.manifest, "Dataset manifest (dataset.json)")->required();
  g->add_option("--regime", aug.regime, "vis | ssda0 | ssda:<primes> | ssda:all | vi | svi:<prime>")->required();
  g->add_flag("--aligned", aug.aligned, "Round view bands up to whole patch rows");
  g->add_option("--width", aug.width, "Stride image width (default 112)");
  g->add_option("--patch-size", aug.patch_size, "Patch size (default 16)");
  g->add_option("--threshold", aug.threshold, "Intensity cut on the 0-255 scale (default 93)");
  g->add_option("--out", aug.out, "Output directory")->required();
  g->add_option("--threads", aug.threads, "Worker threads (default $ZACHVIT_THREADS or 1)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a classifier on an augmented dataset");
  t->add_option("--manifest", tr.manifest, "Augmented dataset directory or its manifest.json")->required();
  t->add_option("--model", tr.model, "zachvit | minimal-vit (default zachvit)");
  t->add_option("--config", tr.config, "JSON file with optional \"train\", \"zachvit\", \"minimal-vit\" and \"model\" sections");
  t->add_option("--out", tr.out, "Run directory")->required();
  t->add_option("--lr", tr.lr, "Learning rate (default 1e-4)");
  t->add_option("--epochs", tr.epochs, "Maximum epochs (default 23)");
  t->add_option("--patience", tr.patience, "Early-stopping patience (default 5)");
  t->add_option("--batch-size", tr.batch_size, "Batch size (default 8)");
  t->add_option("--seed", tr.seed, "Seed for initialisation, shuffling and dropout (default 1)");
  t->add_option("--class-weighting", tr.class_weighting, "auto | off (default auto)");
  t->add_option("--threshold", tr.threshold, "Decision threshold for validation metrics (default 0.5)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  e->add_option("--manifest", ev.manifest, "Augmented dataset directory or its manifest.json")->required();
  e->add_option("--split", ev.split, "val | test (default test)");
  e->add_option("--threshold", ev.threshold, "Decision threshold (default 0.5)");
  e->add_option("--out", ev.out, "Output directory (default <checkpoint dir>/eval_<split>)");

  VerifyArgs ver;
  auto* v = app.add_subcommand("verify", "Run machine-checkable verification suites");
  std::string suites_help = "all";
  for (const auto& n : verify::suite_names()) suites_help += " | " + n;
  v->add_option("--suite", ver.suite, suites_help);
  v->add_option("--seed", ver.seed, "Seed (default 1)");
  v->add_option("--out", ver.out, "Output directory (default verify_results)");

  ReportArgs rep;
  auto* r = app.add_subcommand("report", "Compare training runs: tables and curve plots");
  r->add_option("--runs", rep.runs, "Run directories (or parents of run directories)")->required();
  r->add_option("--out", rep.out, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();  // program name
    app.parse(reversed);
    if (s->parsed()) return cmd_synth(synth, ctx);
    if (g->parsed()) return cmd_augment(aug, ctx);
    if (t->parsed()) return cmd_train(tr, ctx);
    if (e->parsed()) return cmd_eval(ev, ctx);
    if (v->parsed()) return cmd_verify(ver, ctx);
    if (r->parsed()) return cmd_report(rep, ctx);
    return kInputError;
  } catch (const CLI::Success& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex, out, err);
    return kInputError;
  } catch (const InputError& ex) {
    err << "input error: " << ex.what() << "\n";
    return kInputError;
  } catch (const fs::filesystem_error& ex) {
    err << "input error: " << ex.what() << "\n";
    return kInputError;
  } catch (const ConfigError& ex) {
    err << "configuration error: " << ex.what() << "\n";
    return kConfigError;
  } catch (const ShapeError& ex) {
    err << "geometry error: " << ex.what() << "\n";
    return kConfigError;
  } catch (const UndefinedMetricError& ex) {
    err << "configuration error: " << ex.what() << "\n";
    return kConfigError;
  } catch (const NumericError& ex) {
    err << "numeric failure: " << ex.what() << "\n";
    return kVerificationFailed;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kVerificationFailed;
  }
}

}  // namespace zachvit::cli
