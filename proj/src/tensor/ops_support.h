#pragma once

#include <Eigen/Core>

#include "zachvit/tape.h"
#include "zachvit/tensor.h"

namespace zachvit::detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstStridedMap = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;
using StridedMap = Eigen::Map<RowMatrix, 0, Eigen::OuterStride<>>;

inline ConstMatrixMap as_matrix(const Tensor& t) {
  return ConstMatrixMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                        static_cast<Eigen::Index>(t.cols()));
}

// Tape on which an op consuming `inputs` must record, or nullptr.
inline Tape* recording_tape(std::initializer_list<const Tensor*> inputs) {
  Tape* tape = Tape::active();
  if (!tape) return nullptr;
  for (const Tensor* t : inputs) {
    if (t && tape->tracks(*t)) return tape;
  }
  return nullptr;
}

}  // namespace zachvit::detail
