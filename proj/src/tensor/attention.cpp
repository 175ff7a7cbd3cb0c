#include <cmath>

#include "ops_support.h"
#include "zachvit/errors.h"
#include "zachvit/ops.h"

namespace zachvit {

using detail::ConstStridedMap;
using detail::recording_tape;
using detail::RowMatrix;
using detail::StridedMap;

Tensor attention_core(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                      std::size_t tokens_per_item) {
  if (q.shape() != k.shape() || q.shape() != v.shape() || q.rank() != 2) {
    throw ShapeError("attention: q/k/v shapes differ, " + shape_string(q.shape()) + ", " +
                     shape_string(k.shape()) + ", " + shape_string(v.shape()));
  }
  const std::size_t rows = q.rows(), d = q.cols(), n = tokens_per_item;
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("attention: width " + std::to_string(d) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (n == 0 || rows % n != 0) {
    throw ShapeError("attention: " + std::to_string(rows) + " rows are not a multiple of " +
                     std::to_string(n) + " tokens");
  }
  const std::size_t items = rows / n, dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  const Eigen::OuterStride<> stride(static_cast<Eigen::Index>(d));
  const auto N = static_cast<Eigen::Index>(n);
  const auto DK = static_cast<Eigen::Index>(dk);

  // probs holds softmax(QK^T * scale) for every (item, head), n x n each.
  std::vector<double> probs(items * heads * n * n);
  std::vector<double> out(rows * d);
  RowMatrix scores(N, N);
  for (std::size_t b = 0; b < items; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = b * n * d + h * dk;
      ConstStridedMap qh(q.data() + off, N, DK, stride);
      ConstStridedMap kh(k.data() + off, N, DK, stride);
      ConstStridedMap vh(v.data() + off, N, DK, stride);
      scores.noalias() = (qh * kh.transpose()) * scale;
      double* p = probs.data() + (b * heads + h) * n * n;
      for (std::size_t i = 0; i < n; ++i) {
        const double mx = scores.row(static_cast<Eigen::Index>(i)).maxCoeff();
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          s += (p[i * n + j] = std::exp(scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - mx));
        }
        for (std::size_t j = 0; j < n; ++j) p[i * n + j] /= s;
      }
      detail::ConstMatrixMap pm(p, N, N);
      StridedMap oh(out.data() + off, N, DK, stride);
      oh.noalias() = pm * vh;
    }
  }
  Tensor result({rows, d}, std::move(out));
  Tape* tape = recording_tape({&q, &k, &v});
  if (!tape) return result;
  return tape->record(
      "attention", result, {&q, &k, &v},
      [q, k, v, items, heads, n, d, dk, scale, probs = std::move(probs)](std::span<const double> g,
                                                                         Tape& t) {
        auto gq = t.grad_buffer(q);
        auto gk = t.grad_buffer(k);
        auto gv = t.grad_buffer(v);
        const Eigen::OuterStride<> stride(static_cast<Eigen::Index>(d));
        const auto N = static_cast<Eigen::Index>(n);
        const auto DK = static_cast<Eigen::Index>(dk);
        RowMatrix dp(N, N), ds(N, N);
        for (std::size_t b = 0; b < items; ++b) {
          for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = b * n * d + h * dk;
            ConstStridedMap qh(q.data() + off, N, DK, stride);
            ConstStridedMap kh(k.data() + off, N, DK, stride);
            ConstStridedMap vh(v.data() + off, N, DK, stride);
            ConstStridedMap doh(g.data() + off, N, DK, stride);
            detail::ConstMatrixMap pm(probs.data() + (b * heads + h) * n * n, N, N);
            if (!gv.empty()) {
              StridedMap(gv.data() + off, N, DK, stride).noalias() += pm.transpose() * doh;
            }
            if (gq.empty() && gk.empty()) continue;
            dp.noalias() = doh * vh.transpose();
            for (Eigen::Index i = 0; i < N; ++i) {
              const double dot = dp.row(i).dot(pm.row(i));
              ds.row(i) = (pm.row(i).array() * (dp.row(i).array() - dot)).matrix();
            }
            ds *= scale;
            if (!gq.empty()) StridedMap(gq.data() + off, N, DK, stride).noalias() += ds * kh;
            if (!gk.empty()) StridedMap(gk.data() + off, N, DK, stride).noalias() += ds.transpose() * qh;
          }
        }
      });
}

Tensor multi_head_attention(const Tensor& x, const AttentionWeights& w, std::size_t heads,
                            std::size_t tokens_per_item) {
  if (x.rank() != 2) throw ShapeError("multi_head_attention: expected a matrix input");
  const std::size_t d = x.cols();
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("multi_head_attention: width " + std::to_string(d) +
                      " is not divisible by " + std::to_string(heads) + " heads");
  }
  const Tensor q = matmul(x, w.wq);
  const Tensor k = matmul(x, w.wk);
  const Tensor v = matmul(x, w.wv);
  return dense(attention_core(q, k, v, heads, tokens_per_item), w.wo, w.bo);
}

}  // namespace zachvit
