#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "zachvit/model.h"
#include "zachvit/ops.h"
#include "zachvit/ssda.h"

namespace zachvit {

// ---------------------------------------------------------------------------
// Metrics

// Area under the ROC curve by trapezoidal integration over distinct
// thresholds; tied scores share a midrank. Throws UndefinedMetricError when
// either class is absent.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

Confusion confusion_at(std::span<const double> probabilities, std::span<const int> labels, double threshold);

struct MetricsReport {
  double sensitivity = 0.0;
  double specificity = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  std::optional<double> roc_auc;  // absent when a class is missing
  Confusion confusion;
  double threshold = 0.5;
};

// Predicted class 1 iff probability >= threshold. Undefined ratios (0/0) are
// reported as 0.
MetricsReport compute_metrics(std::span<const double> probabilities, std::span<const int> labels, double threshold);
nlohmann::json to_json(const MetricsReport& m);

// ---------------------------------------------------------------------------
// Optimisation

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// One Adam update at step t >= 1 using each parameter's accumulated gradient.
// A non-finite gradient aborts before any parameter is modified.
void adam_step(std::span<Parameter* const> params, AdamState& state, long t, const AdamConfig& config);

// Balanced weights total / (2 * count_c). Throws ConfigError for one-class input.
ClassWeights class_weights(std::span<const int> labels);

// ---------------------------------------------------------------------------
// Data

struct StrideSample {
  std::vector<std::uint8_t> pixels;
  int label = 0;
  std::string file;
  std::string source_patient;
};

struct StrideSet {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<StrideSample> samples;

  std::vector<int> labels() const;
  std::size_t size() const { return samples.size(); }
};

// Reads the images of one split from an augmented dataset directory.
StrideSet load_split(const std::filesystem::path& dataset_dir, Split split);
StrideSet load_split(const AugmentedManifest& manifest, const std::filesystem::path& dataset_dir, Split split);

// [B*N x patch_dim] patches for the selected samples, pixels scaled to [0, 1]
// and replicated across `geometry.channels`.
Tensor batch_patches(const StrideSet& set, std::span<const std::size_t> indices, const Geometry& geometry);

// Throws ConfigError when the images do not match the model geometry.
void check_set_geometry(const StrideSet& set, const Geometry& geometry);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int max_epochs = 23;
  int early_stop_patience = 5;
  std::size_t batch_size = 8;
  bool class_weighting = true;  // "auto" | "off"
  double eval_threshold = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
  AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_eps}; }
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_auc = 0.0;
  double val_loss = 0.0;
  double val_auc = 0.0;
  MetricsReport val_metrics;
};

struct EvalResult {
  MetricsReport metrics;
  double loss = 0.0;  // unweighted mean BCE
  std::vector<double> probabilities;
};

// Eval-mode scores for every sample in the set.
EvalResult evaluate(VitModel& model, const StrideSet& set, double threshold, std::size_t batch_size = 16);

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;       // lowest validation loss; weights restored from here
  int peak_auc_epoch = 0;   // highest validation AUC
  bool stopped_early = false;
  ClassWeights weights;
  std::filesystem::path best_checkpoint;
  std::filesystem::path peak_checkpoint;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Trains `model` in place. Writes `best.ckpt` (lowest validation loss) and
// `peak_auc.ckpt` into out_dir as they improve, then restores the best
// weights. A non-finite loss raises NumericError, leaving the last good
// checkpoint on disk.
TrainResult train_model(VitModel& model, const StrideSet& train, const StrideSet& val, const TrainConfig& config,
                        const std::filesystem::path& out_dir, const EpochCallback& on_epoch = {});

// "epoch,train_loss,train_auc,val_loss,val_auc" rows with fixed precision.
std::string curves_csv(std::span<const EpochRecord> history);

}  // namespace zachvit
