#include "zachvit/ops.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ops_support.h"
#include "zachvit/errors.h"
#include "zachvit/rng.h"

namespace zachvit {

using detail::as_matrix;
using detail::ConstMatrixMap;
using detail::MatrixMap;
using detail::recording_tape;
using detail::RowMatrix;

namespace {

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
  }
}

void require_vector_of(const Tensor& v, std::size_t n, const char* op, const char* what) {
  if (v.size() != n) {
    throw ShapeError(std::string(op) + ": " + what + " has shape " + shape_string(v.shape()) +
                     ", expected " + std::to_string(n) + " elements");
  }
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner extents differ, " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  const std::size_t m = a.rows(), n = b.cols();
  std::vector<double> out(m * n);
  MatrixMap(out.data(), m, n).noalias() = as_matrix(a) * as_matrix(b);
  Tensor result({m, n}, std::move(out));
  Tape* tape = recording_tape({&a, &b});
  if (!tape) return result;
  return tape->record("matmul", result, {&a, &b}, [a, b, m, n](std::span<const double> g, Tape& t) {
    ConstMatrixMap dc(g.data(), m, n);
    if (auto ga = t.grad_buffer(a); !ga.empty()) {
      MatrixMap(ga.data(), a.rows(), a.cols()).noalias() += dc * as_matrix(b).transpose();
    }
    if (auto gb = t.grad_buffer(b); !gb.empty()) {
      MatrixMap(gb.data(), b.rows(), b.cols()).noalias() += as_matrix(a).transpose() * dc;
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shapes differ, " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  Tensor result(a.shape(), std::move(out));
  Tape* tape = recording_tape({&a, &b});
  if (!tape) return result;
  return tape->record("add", result, {&a, &b}, [a, b](std::span<const double> g, Tape& t) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_matrix(x, "add_bias");
  const std::size_t r = x.rows(), c = x.cols();
  require_vector_of(bias, c, "add_bias", "bias");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] + bias[j];
  Tensor result(x.shape(), std::move(out));
  Tape* tape = recording_tape({&x, &bias});
  if (!tape) return result;
  return tape->record("add_bias", result, {&x, &bias},
                      [x, bias, r, c](std::span<const double> g, Tape& t) {
                        t.accumulate(x, g);
                        if (auto gb = t.grad_buffer(bias); !gb.empty()) {
                          for (std::size_t i = 0; i < r; ++i)
                            for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
                        }
                      });
}

Tensor add_tiled(const Tensor& x, const Tensor& table) {
  require_matrix(x, "add_tiled");
  require_matrix(table, "add_tiled");
  const std::size_t n = table.rows(), c = table.cols();
  if (x.cols() != c || x.rows() % n != 0) {
    throw ShapeError("add_tiled: " + shape_string(x.shape()) + " is not a stack of " +
                     shape_string(table.shape()));
  }
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + table[i % (n * c)];
  Tensor result(x.shape(), std::move(out));
  Tape* tape = recording_tape({&x, &table});
  if (!tape) return result;
  return tape->record("add_tiled", result, {&x, &table},
                      [x, table, n, c](std::span<const double> g, Tape& t) {
                        t.accumulate(x, g);
                        if (auto gt = t.grad_buffer(table); !gt.empty()) {
                          for (std::size_t i = 0; i < g.size(); ++i) gt[i % (n * c)] += g[i];
                        }
                      });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  Tensor result(x.shape(), std::move(out));
  Tape* tape = recording_tape({&x});
  if (!tape) return result;
  return tape->record("scale", result, {&x}, [x, factor](std::span<const double> g, Tape& t) {
    if (auto gx = t.grad_buffer(x); !gx.empty()) {
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * factor;
    }
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  Tensor result({1}, {s});
  Tape* tape = recording_tape({&x});
  if (!tape) return result;
  return tape->record("sum", result, {&x}, [x](std::span<const double> g, Tape& t) {
    if (auto gx = t.grad_buffer(x); !gx.empty()) {
      for (auto& v : gx) v += g[0];
    }
  });
}

Tensor dense(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_matrix(weight, "dense");
  if (x.rank() != 2 || x.cols() != weight.rows()) {
    throw ShapeError("dense: input " + shape_string(x.shape()) + " does not match weight " +
                     shape_string(weight.shape()));
  }
  return add_bias(matmul(x, weight), bias);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_matrix(x, "layer_norm");
  if (eps <= 0) throw ConfigError("layer_norm: eps must be positive");
  const std::size_t r = x.rows(), d = x.cols();
  require_vector_of(gamma, d, "layer_norm", "gamma");
  require_vector_of(beta, d, "layer_norm", "beta");

  std::vector<double> xhat(x.size()), inv_std(r), out(x.size());
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = x.data() + i * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(d);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[i * d + j] = (row[j] - mean) * inv_std[i];
      out[i * d + j] = gamma[j] * xhat[i * d + j] + beta[j];
    }
  }
  Tensor result(x.shape(), std::move(out));
  Tape* tape = recording_tape({&x, &gamma, &beta});
  if (!tape) return result;
  return tape->record(
      "layer_norm", result, {&x, &gamma, &beta},
      [x, gamma, beta, r, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          std::span<const double> g, Tape& t) {
        if (auto gg = t.grad_buffer(gamma); !gg.empty()) {
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < d; ++j) gg[j] += g[i * d + j] * xhat[i * d + j];
        }
        if (auto gb = t.grad_buffer(beta); !gb.empty()) {
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < d; ++j) gb[j] += g[i * d + j];
        }
        auto gx = t.grad_buffer(x);
        if (gx.empty()) return;
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t i = 0; i < r; ++i) {
          double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double dxh = g[i * d + j] * gamma[j];
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * xhat[i * d + j];
          }
          mean_dxhat *= inv_d;
          mean_dxhat_xhat *= inv_d;
          for (std::size_t j = 0; j < d; ++j) {
            const double dxh = g[i * d + j] * gamma[j];
            gx[i * d + j] += inv_std[i] * (dxh - mean_dxhat - xhat[i * d + j] * mean_dxhat_xhat);
          }
        }
      });
}

Tensor softmax_rows(const Tensor& x) {
  const std::size_t n = x.shape().back();
  const std::size_t r = x.size() / n;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = x.data() + i * n;
    double* o = out.data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += (o[j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < n; ++j) o[j] /= s;
  }
  Tensor result(x.shape(), std::move(out));
  Tape* tape = recording_tape({&x});
  if (!tape) return result;
  return tape->record("softmax_rows", result, {&x}, [x, result, r, n](std::span<const double> g, Tape& t) {
    auto gx = t.grad_buffer(x);
    if (gx.empty()) return;
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * result[i * n + j];
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += result[i * n + j] * (g[i * n + j] - dot);
    }
  });
}

Tensor gelu(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * x[i] * (1.0 + std::erf(x[i] * std::numbers::sqrt2 / 2.0));
  }
  Tensor result(x.shape(), std::move(out));
  Tape* tape = recording_tape({&x});
  if (!tape) return result;
  return tape->record("gelu", result, {&x}, [x](std::span<const double> g, Tape& t) {
    auto gx = t.grad_buffer(x);
    if (gx.empty()) return;
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const double v = x[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
      gx[i] += g[i] * (cdf + v * pdf);
    }
  });
}

Tensor gap(const Tensor& x, std::size_t group) {
  require_matrix(x, "gap");
  if (group == 0 || x.rows() == 0) throw ShapeError("gap: empty token set");
  if (x.rows() % group != 0) {
    throw ShapeError("gap: " + std::to_string(x.rows()) + " rows are not a multiple of " +
                     std::to_string(group));
  }
  const std::size_t b = x.rows() / group, d = x.cols();
  const double inv = 1.0 / static_cast<double>(group);
  std::vector<double> out(b * d, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t n = 0; n < group; ++n) {
      const double* row = x.data() + (i * group + n) * d;
      for (std::size_t j = 0; j < d; ++j) out[i * d + j] += row[j];
    }
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] *= inv;
  }
  Tensor result({b, d}, std::move(out));
  Tape* tape = recording_tape({&x});
  if (!tape) return result;
  return tape->record("gap", result, {&x}, [x, group, d, inv](std::span<const double> g, Tape& t) {
    auto gx = t.grad_buffer(x);
    if (gx.empty()) return;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const std::size_t item = r / group;
      for (std::size_t j = 0; j < d; ++j) gx[r * d + j] += g[item * d + j] * inv;
    }
  });
}

Tensor gap(const Tensor& x) {
  if (x.rank() != 2 || x.rows() == 0) throw ShapeError("gap: empty token set");
  return gap(x, x.rows());
}

Tensor dropout(const Tensor& x, double rate, Mode mode, Xoshiro256pp* rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::eval || rate == 0.0) return x;
  if (!rng) throw ConfigError("dropout: train mode needs a random stream");
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = rng->uniform() < rate ? 0.0 : keep_scale;
    out[i] = x[i] * mask[i];
  }
  Tensor result(x.shape(), std::move(out));
  Tape* tape = recording_tape({&x});
  if (!tape) return result;
  return tape->record("dropout", result, {&x},
                      [x, mask = std::move(mask)](std::span<const double> g, Tape& t) {
                        auto gx = t.grad_buffer(x);
                        if (gx.empty()) return;
                        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * mask[i];
                      });
}

Tensor sigmoid_bce(const Tensor& logits, const Tensor& labels, ClassWeights weights) {
  if (logits.size() != labels.size() || logits.empty()) {
    throw ShapeError("sigmoid_bce: logits " + shape_string(logits.shape()) + " vs labels " +
                     shape_string(labels.shape()));
  }
  const std::size_t b = logits.size();
  std::vector<double> w(b);
  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const double y = labels[i];
    if (y != 0.0 && y != 1.0) {
      throw InputError("sigmoid_bce: label " + std::to_string(y) + " at index " +
                       std::to_string(i) + " is not binary");
    }
    const double z = logits[i];
    w[i] = y == 1.0 ? weights.positive : weights.negative;
    loss += w[i] * (std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))));
  }
  const double inv_b = 1.0 / static_cast<double>(b);
  Tensor result({1}, {loss * inv_b});
  Tape* tape = recording_tape({&logits});
  if (!tape) return result;
  return tape->record("sigmoid_bce", result, {&logits},
                      [logits, labels, w = std::move(w), inv_b](std::span<const double> g, Tape& t) {
                        auto gz = t.grad_buffer(logits);
                        if (gz.empty()) return;
                        for (std::size_t i = 0; i < gz.size(); ++i) {
                          gz[i] += g[0] * w[i] * (sigmoid(logits[i]) - labels[i]) * inv_b;
                        }
                      });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  if (begin >= end || end > x.rows()) throw ShapeError("slice_rows: bad range");
  const std::size_t c = x.cols();
  Shape s = x.shape();
  s[0] = end - begin;
  return Tensor(std::move(s), std::vector<double>(x.data() + begin * c, x.data() + end * c));
}

Tensor permute_rows(const Tensor& x, std::span<const std::size_t> order) {
  if (order.size() != x.rows()) throw ShapeError("permute_rows: order length differs from rows");
  const std::size_t c = x.cols();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    std::copy_n(x.data() + order[i] * c, c, out.data() + i * c);
  }
  return Tensor(x.shape(), std::move(out));
}

}  // namespace zachvit
