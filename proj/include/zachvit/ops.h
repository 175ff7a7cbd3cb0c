#pragma once

#include <cstddef>
#include <span>
#include <utility>

#include "zachvit/tensor.h"

namespace zachvit {

class Xoshiro256pp;

enum class Mode { train, eval };

// Matrix product of [m x k] and [k x n].
Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise sum of equally shaped tensors.
Tensor add(const Tensor& a, const Tensor& b);

// x [R x C] + bias [C] broadcast over rows.
Tensor add_bias(const Tensor& x, const Tensor& bias);

// x [B*N x C] + table [N x C], the table repeated for each group of N rows.
Tensor add_tiled(const Tensor& x, const Tensor& table);

Tensor scale(const Tensor& x, double factor);

// Sum of all elements, shape [1].
Tensor sum(const Tensor& x);

// x W + b.
Tensor dense(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Row-wise normalization with population variance, eps inside the root.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Softmax over the last axis with max subtraction.
Tensor softmax_rows(const Tensor& x);

// Exact (erf) GELU.
Tensor gelu(const Tensor& x);

// Mean over each consecutive group of `group` rows: [B*group x d] -> [B x d].
Tensor gap(const Tensor& x, std::size_t group);
// Mean over all rows: [N x d] -> [1 x d].
Tensor gap(const Tensor& x);

// Inverted dropout. Eval mode and rate 0 return x unchanged without drawing.
Tensor dropout(const Tensor& x, double rate, Mode mode, Xoshiro256pp* rng);

// Weights applied to negative and positive samples.
struct ClassWeights {
  double negative = 1.0;
  double positive = 1.0;
};

// Mean over the batch of w_y * BCE(sigmoid(logit), y), in the stable
// max(z,0) - z*y + log1p(exp(-|z|)) form. Shape [1].
Tensor sigmoid_bce(const Tensor& logits, const Tensor& labels, ClassWeights weights = {});

struct AttentionWeights {
  Tensor wq, wk, wv;  // [d x d], no bias
  Tensor wo, bo;      // [d x d], [d]
};

// Scaled dot-product attention core on pre-projected Q, K, V, all [B*N x d].
// Heads are contiguous column blocks of width d/heads; rows attend only
// within their own group of N.
Tensor attention_core(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                      std::size_t tokens_per_item);

// Self-attention over groups of `tokens_per_item` rows. No masking and no
// positional terms.
Tensor multi_head_attention(const Tensor& x, const AttentionWeights& w, std::size_t heads,
                            std::size_t tokens_per_item);

// Rows [begin, end) of a row-major tensor (untracked helper for tests/tools).
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);

// Rows of x reordered so that out[i] = x[order[i]] (untracked).
Tensor permute_rows(const Tensor& x, std::span<const std::size_t> order);

double sigmoid(double z);

}  // namespace zachvit
