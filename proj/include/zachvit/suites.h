#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace zachvit::verify {

// Outcome of one verification suite. `measured` is the headline quantity and
// `limit` the bound it was held to (direction is suite-specific).
struct SuiteResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double limit = 0.0;
  std::string summary;
  nlohmann::json details = nlohmann::json::object();
  double seconds = 0.0;
};

nlohmann::json to_json(const SuiteResult& r);

inline constexpr double kGradTolerance = 1e-4;
inline constexpr double kGradStep = 1e-5;
inline constexpr double kInvarianceTolerance = 1e-10;
inline constexpr double kBaselineMinDeviation = 1e-3;
inline constexpr double kAucTolerance = 1e-9;

// Finite-difference check of every differentiable op plus small end-to-end
// passes of both models.
SuiteResult gradcheck_suite(std::uint64_t seed = 1);

// Random images x random patch permutations through the default ZACH-ViT;
// the Minimal ViT under the same sweep is reported in details.
SuiteResult perm_invariance_suite(std::size_t images = 20, std::size_t permutations = 100, std::uint64_t seed = 1);

// Baseline contrast: Minimal ViT deviation under the same sweep, must exceed
// kBaselineMinDeviation.
SuiteResult baseline_contrast_suite(std::size_t images = 20, std::size_t permutations = 100, std::uint64_t seed = 1);

// All 24 view orders of a synthetic exam; aligned bands must give identical
// logits, quarter-height bands are measured only.
SuiteResult view_invariance_suite(std::uint64_t seed = 1);

SuiteResult params_suite();

SuiteResult auc_oracle_suite(std::size_t instances = 200, std::uint64_t seed = 1);

// Expansion counts 24(1+k) for k = 0..10, S4 coverage and byte-identical reruns.
SuiteResult ssda_cardinality_suite(std::uint64_t seed = 1);

// Threshold boundary (92 -> 0, 93 -> 93/255) and idempotence.
SuiteResult threshold_suite();

// Balanced class weights on 43 negatives / 18 positives.
SuiteResult class_weight_suite();

std::vector<std::string> suite_names();
SuiteResult run_suite(const std::string& name, std::uint64_t seed = 1);

}  // namespace zachvit::verify
