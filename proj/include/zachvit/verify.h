#pragma once

// Independent oracles used by the test suites and `zachvit verify`. Nothing
// here shares code paths with the implementations it checks: gradients are
// compared against central differences of forward-only evaluations, AUC
// against brute-force pair counting.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "zachvit/parameter.h"
#include "zachvit/tensor.h"

namespace zachvit::verify {

// |a - b| / max(|a|, |b|, floor). The floor keeps near-zero gradients from
// turning round-off into large relative errors.
double relative_error(double a, double b, double floor = 1e-6);

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::string worst;  // "<param>[index]"
  std::size_t elements = 0;
};

// Compares tape gradients of `loss` (a scalar-valued closure that reads the
// parameters through Parameter::use) with central differences of step `step`.
// At most `max_per_param` elements of each parameter are probed, chosen by a
// fixed-stride sweep.
GradCheckReport check_gradients(std::span<Parameter* const> params, const std::function<Tensor()>& loss,
                                double step = 1e-5,
                                std::size_t max_per_param = std::numeric_limits<std::size_t>::max());

// Mann-Whitney concordance: fraction of (positive, negative) pairs with the
// positive scored higher, ties counted as one half.
double pairwise_auc(std::span<const double> scores, std::span<const int> labels);

// Reference splitmix64 -> xoshiro256++ -> Fisher-Yates permutation of 0..n-1,
// written out longhand from the published algorithms.
std::vector<std::size_t> reference_shuffle(std::size_t n, std::uint64_t seed);

}  // namespace zachvit::verify
