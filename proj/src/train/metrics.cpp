#include <algorithm>
#include <numeric>

#include "zachvit/errors.h"
#include "zachvit/train.h"

namespace zachvit {

namespace {
void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("metrics: scores and labels differ in length");
  for (int y : labels)
    if (y != 0 && y != 1) throw InputError("metrics: labels must be 0 or 1");
}

double ratio(std::size_t num, std::size_t den) { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }
}  // namespace

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw UndefinedMetricError("roc_auc: both classes are required");

  // Sweep thresholds from high to low; each group of tied scores moves the
  // ROC point diagonally, which is the midrank treatment of ties.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double area = 0.0;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const std::size_t tp0 = tp, fp0 = fp;
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] == 1 ? tp : fp) += 1;
    area += static_cast<double>(fp - fp0) * static_cast<double>(tp + tp0) / 2.0;
  }
  return area / (static_cast<double>(pos) * static_cast<double>(neg));
}

Confusion confusion_at(std::span<const double> probabilities, std::span<const int> labels, double threshold) {
  check_inputs(probabilities, labels);
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = probabilities[i] >= threshold;
    if (labels[i] == 1) {
      (predicted ? c.tp : c.fn) += 1;
    } else {
      (predicted ? c.fp : c.tn) += 1;
    }
  }
  return c;
}

MetricsReport compute_metrics(std::span<const double> probabilities, std::span<const int> labels, double threshold) {
  MetricsReport m;
  m.threshold = threshold;
  m.confusion = confusion_at(probabilities, labels, threshold);
  const Confusion& c = m.confusion;
  m.sensitivity = ratio(c.tp, c.tp + c.fn);
  m.specificity = ratio(c.tn, c.tn + c.fp);
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  if (c.tp + c.fn > 0 && c.tn + c.fp > 0) m.roc_auc = roc_auc(probabilities, labels);
  return m;
}

nlohmann::json to_json(const MetricsReport& m) {
  return {{"sensitivity", m.sensitivity},
          {"specificity", m.specificity},
          {"accuracy", m.accuracy},
          {"precision", m.precision},
          {"f1", m.f1},
          {"roc_auc", m.roc_auc ? nlohmann::json(*m.roc_auc) : nlohmann::json(nullptr)},
          {"threshold", m.threshold},
          {"confusion", {{"tp", m.confusion.tp}, {"fp", m.confusion.fp}, {"tn", m.confusion.tn}, {"fn", m.confusion.fn}}}};
}

}  // namespace zachvit
