#pragma once

#include <stdexcept>
#include <string>

namespace zachvit {

// Operand extents are incompatible with the operation.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A configuration value or model/data geometry is invalid.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Input data (files, labels, permutations, ROIs) is malformed or missing.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An API contract was violated by the caller (e.g. backward on a non-scalar).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// NaN or Inf appeared in a loss or gradient.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A metric is undefined for the given input (e.g. AUC with one class).
struct UndefinedMetricError : std::domain_error {
  using std::domain_error::domain_error;
};

}  // namespace zachvit
