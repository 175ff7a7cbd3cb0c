#include <algorithm>
#include <cmath>

#include "zachvit/errors.h"
#include "zachvit/train.h"

namespace zachvit {

void adam_step(std::span<Parameter* const> params, AdamState& state, long t, const AdamConfig& config) {
  if (t < 1) throw ContractError("adam_step: step index must be >= 1");
  for (const Parameter* p : params) {
    const auto& g = p->grad();
    if (g.size() != p->size()) throw ShapeError("adam_step: gradient of " + p->name() + " has the wrong size");
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw NumericError("non-finite gradient in parameter " + p->name() + " at index " + std::to_string(i));
      }
    }
  }
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), {});
    state.v.assign(params.size(), {});
  }
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != p.size()) {
      m.assign(p.size(), 0.0);
      v.assign(p.size(), 0.0);
    }
    const auto& g = p.grad();
    std::vector<double> values(p.value().values().begin(), p.value().values().end());
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      values[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.eps);
    }
    p.assign(std::move(values));
  }
}

ClassWeights class_weights(std::span<const int> labels) {
  const auto pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const auto neg = static_cast<double>(std::count(labels.begin(), labels.end(), 0));
  if (pos + neg != static_cast<double>(labels.size())) throw InputError("class_weights: labels must be 0 or 1");
  if (pos == 0 || neg == 0) throw ConfigError("class_weights: training labels contain a single class");
  const double total = pos + neg;
  return {total / (2.0 * neg), total / (2.0 * pos)};
}

}  // namespace zachvit
