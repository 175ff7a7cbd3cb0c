#include <cmath>
#include <cstdio>
#include <limits>

#include "zachvit/errors.h"
#include "zachvit/rng.h"
#include "zachvit/tape.h"
#include "zachvit/train.h"

namespace zachvit {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (early_stop_patience < 0 || early_stop_patience > max_epochs) {
    throw ConfigError("early_stop_patience must lie in [0, max_epochs]");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(eval_threshold >= 0.0 && eval_threshold <= 1.0)) throw ConfigError("eval_threshold must lie in [0, 1]");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"max_epochs", c.max_epochs},
          {"early_stop_patience", c.early_stop_patience},
          {"batch_size", c.batch_size},
          {"class_weighting", c.class_weighting ? "auto" : "off"},
          {"eval_threshold", c.eval_threshold},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  try {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
    c.batch_size = j.value("batch_size", c.batch_size);
    if (j.contains("class_weighting")) {
      const auto mode = j.at("class_weighting").get<std::string>();
      if (mode != "auto" && mode != "off") throw ConfigError("class_weighting must be auto or off");
      c.class_weighting = mode == "auto";
    }
    c.eval_threshold = j.value("eval_threshold", c.eval_threshold);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

double sigmoid_scalar(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

Tensor label_column(const StrideSet& set, std::span<const std::size_t> idx) {
  std::vector<double> y;
  y.reserve(idx.size());
  for (auto i : idx) y.push_back(set.samples[i].label);
  return Tensor({idx.size(), 1}, std::move(y));
}

std::vector<std::vector<double>> snapshot(const ParameterStore& store) {
  std::vector<std::vector<double>> out;
  for (const Parameter* p : store.all()) out.emplace_back(p->value().values().begin(), p->value().values().end());
  return out;
}

void restore(ParameterStore& store, const std::vector<std::vector<double>>& values) {
  auto params = store.all();
  for (std::size_t k = 0; k < params.size(); ++k) params[k]->assign(values[k]);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10f", v);
  return buf;
}

}  // namespace

EvalResult evaluate(VitModel& model, const StrideSet& set, double threshold, std::size_t batch_size) {
  const Geometry g = model.geometry();
  check_set_geometry(set, g);
  if (set.size() == 0) throw InputError("evaluate: no samples");
  EvalResult r;
  r.probabilities.reserve(set.size());
  double loss_sum = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < set.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(set.size(), start + batch_size); ++i) idx.push_back(i);
    const Tensor logits = model.forward_patches(batch_patches(set, idx, g), idx.size(), Mode::eval, nullptr);
    loss_sum += sigmoid_bce(logits, label_column(set, idx)).item() * static_cast<double>(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) r.probabilities.push_back(sigmoid_scalar(logits[i]));
  }
  r.loss = loss_sum / static_cast<double>(set.size());
  r.metrics = compute_metrics(r.probabilities, set.labels(), threshold);
  return r;
}

std::string curves_csv(std::span<const EpochRecord> history) {
  std::string out = "epoch,train_loss,train_auc,val_loss,val_auc\n";
  for (const auto& e : history) {
    out += std::to_string(e.epoch) + "," + format_double(e.train_loss) + "," + format_double(e.train_auc) + "," +
           format_double(e.val_loss) + "," + format_double(e.val_auc) + "\n";
  }
  return out;
}

TrainResult train_model(VitModel& model, const StrideSet& train, const StrideSet& val, const TrainConfig& config,
                        const fs::path& out_dir, const EpochCallback& on_epoch) {
  config.validate();
  const Geometry g = model.geometry();
  check_set_geometry(train, g);
  check_set_geometry(val, g);
  if (train.size() == 0 || val.size() == 0) throw InputError("train: empty training or validation split");
  fs::create_directories(out_dir);

  TrainResult result;
  const auto train_labels = train.labels();
  result.weights = config.class_weighting ? class_weights(train_labels) : ClassWeights{};
  result.best_checkpoint = out_dir / "best.ckpt";
  result.peak_checkpoint = out_dir / "peak_auc.ckpt";

  const auto params = model.params().all();
  AdamState adam;
  long step = 0;
  Xoshiro256pp dropout_rng(derive_seed(config.seed, "dropout"));
  double best_loss = std::numeric_limits<double>::infinity();
  double peak_auc = -1.0;
  auto best_values = snapshot(model.params());
  int wait = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Xoshiro256pp shuffle_rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    const auto order = shuffled_indices(train.size(), shuffle_rng);
    std::vector<double> train_probs(train.size());
    std::vector<int> train_y(train.size());
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      model.params().zero_grad();
      Tape tape;
      TapeScope scope(tape);
      const Tensor logits = model.forward_patches(batch_patches(train, idx, g), idx.size(), Mode::train, &dropout_rng);
      const Tensor loss = sigmoid_bce(logits, label_column(train, idx), result.weights);
      if (!std::isfinite(loss.item())) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) +
                           "; last good checkpoint: " + result.best_checkpoint.string());
      }
      tape.backward(loss);
      adam_step(params, adam, ++step, config.adam());
      loss_sum += loss.item() * static_cast<double>(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        train_probs[start + i] = sigmoid_scalar(logits[i]);
        train_y[start + i] = train.samples[idx[i]].label;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train.size());
    try {
      rec.train_auc = roc_auc(train_probs, train_y);
    } catch (const UndefinedMetricError&) {
      rec.train_auc = std::numeric_limits<double>::quiet_NaN();
    }
    const EvalResult v = evaluate(model, val, config.eval_threshold);
    if (!std::isfinite(v.loss)) {
      throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch) +
                         "; last good checkpoint: " + result.best_checkpoint.string());
    }
    rec.val_loss = v.loss;
    rec.val_auc = v.metrics.roc_auc.value_or(std::numeric_limits<double>::quiet_NaN());
    rec.val_metrics = v.metrics;
    result.history.push_back(rec);

    const nlohmann::json extra = {{"epoch", epoch}, {"val_loss", rec.val_loss}, {"val_auc", rec.val_auc},
                                  {"train_config", to_json(config)}};
    if (rec.val_auc > peak_auc) {
      peak_auc = rec.val_auc;
      result.peak_auc_epoch = epoch;
      save_checkpoint(model, result.peak_checkpoint.string(), extra);
    }
    bool stop = false;
    if (rec.val_loss < best_loss) {
      best_loss = rec.val_loss;
      result.best_epoch = epoch;
      best_values = snapshot(model.params());
      save_checkpoint(model, result.best_checkpoint.string(), extra);
      wait = 0;
    } else if (++wait >= config.early_stop_patience) {
      stop = true;
    }
    write_text_atomic(out_dir / "curves.csv", curves_csv(result.history));
    if (on_epoch) on_epoch(rec);
    if (stop) {
      result.stopped_early = epoch < config.max_epochs;
      break;
    }
  }
  restore(model.params(), best_values);
  return result;
}

}  // namespace zachvit
