#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "test_util.h"
#include "zachvit/errors.h"
#include "zachvit/model.h"
#include "zachvit/ops.h"
#include "zachvit/parameter.h"
#include "zachvit/rng.h"
#include "zachvit/tape.h"
#include "zachvit/verify.h"

using namespace zachvit;
using zachvit::testing::max_abs_diff;
using zachvit::testing::random_param;
using zachvit::testing::random_tensor;
using verify::check_gradients;

namespace {

void expect_values(const Tensor& t, std::initializer_list<double> expected, double tol = 1e-12) {
  ASSERT_EQ(t.size(), expected.size());
  std::size_t i = 0;
  for (double e : expected) EXPECT_NEAR(t[i++], e, tol) << "index " << i - 1;
}

}  // namespace

// --- rng ---------------------------------------------------------------

TEST(Rng, SplitMixReferenceValue) {
  SplitMix64 sm(0);
  EXPECT_EQ(sm.next(), 0xE220A8397B1DCDAFull);
}

TEST(Rng, ShuffleMatchesReferenceOracle) {
  for (std::uint64_t seed : {2u, 3u, 5u, 29u}) {
    Xoshiro256pp rng(seed);
    EXPECT_EQ(shuffled_indices(16, rng), verify::reference_shuffle(16, seed)) << "seed " << seed;
  }
}

TEST(Rng, BelowStaysInRange) {
  Xoshiro256pp rng(7);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(rng.below(3), 3u);
  EXPECT_EQ(rng.below(1), 0u);
}

// --- matmul ------------------------------------------------------------

TEST(Matmul, IdentityAndHandCase) {
  expect_values(matmul(Tensor::matrix({{1, 0}, {0, 1}}), Tensor::matrix({{1, 2}, {3, 4}})), {1, 2, 3, 4});
  const Tensor c = matmul(Tensor::matrix({{1, 2}}), Tensor::matrix({{3}, {4}}));
  EXPECT_EQ(c.shape(), (Shape{1, 1}));
  EXPECT_EQ(c[0], 11.0);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3] x [2x3]"), std::string::npos) << e.what();
  }
}

TEST(Matmul, GradientOfSumIsOnesTimesBTranspose) {
  Xoshiro256pp rng(11);
  Parameter a = random_param("a", {5, 4}, rng);
  Parameter b = random_param("b", {4, 3}, rng);
  std::vector<Parameter*> ps{&a, &b};
  const auto report = check_gradients(ps, [&] { return sum(matmul(a.use(), b.use())); });
  EXPECT_LE(report.max_rel_error, 1e-6) << report.worst;

  // Closed form: d sum / dA = 1_{5x3} B^T, i.e. each row equals B's row sums.
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t k = 0; k < 4; ++k) {
      double rowsum = 0;
      for (std::size_t j = 0; j < 3; ++j) rowsum += b.value().at(k, j);
      EXPECT_NEAR(a.grad()[i * 4 + k], rowsum, 1e-12);
    }
}

// --- dense -------------------------------------------------------------

TEST(Dense, HandCases) {
  expect_values(dense(Tensor::matrix({{1, 0}}), Tensor::matrix({{1, 0}, {0, 1}}), Tensor::vector({0, 0})), {1, 0});
  expect_values(dense(Tensor::matrix({{1, 1}}), Tensor::matrix({{2}, {3}}), Tensor::vector({1})), {6});
  EXPECT_THROW(dense(Tensor::zeros({1, 3}), Tensor::zeros({2, 2}), Tensor::zeros({2})), ShapeError);
}

TEST(Dense, GradientMatchesFiniteDifferences) {
  Xoshiro256pp rng(3);
  Parameter x = random_param("x", {3, 4}, rng);
  Parameter w = random_param("w", {4, 2}, rng);
  Parameter b = random_param("b", {2}, rng);
  std::vector<Parameter*> ps{&x, &w, &b};
  // Row weights give every output element a distinct sensitivity.
  const auto report = check_gradients(ps, [&] {
    return sum(matmul(Tensor({1, 3}, {0.3, -1.2, 0.7}), dense(x.use(), w.use(), b.use())));
  });
  EXPECT_LE(report.max_rel_error, 1e-6) << report.worst;
}

// --- layer_norm --------------------------------------------------------

TEST(LayerNorm, ConstantRowMapsToZero) {
  expect_values(layer_norm(Tensor::matrix({{5, 5, 5}}), Tensor::full({3}, 1), Tensor::zeros({3})), {0, 0, 0});
}

TEST(LayerNorm, NormalizedRowIsFixedPoint) {
  expect_values(layer_norm(Tensor::matrix({{1, -1}}), Tensor::full({2}, 1), Tensor::zeros({2}), 1e-15),
                {1, -1}, 1e-12);
}

TEST(LayerNorm, ScalarOracle) {
  // mean 2, population variance 2/3.
  const double eps = 1e-5;
  const double inv = 1.0 / std::sqrt(2.0 / 3.0 + eps);
  const Tensor y = layer_norm(Tensor::matrix({{1, 2, 3}}), Tensor::vector({2, 1, 0.5}),
                              Tensor::vector({0.1, 0.2, 0.3}), eps);
  expect_values(y, {2 * (-1 * inv) + 0.1, 0.2, 0.5 * inv + 0.3}, 1e-14);
}

TEST(LayerNorm, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Xoshiro256pp rng(100 + seed);
    Parameter x = random_param("x", {3, 5}, rng, -2, 2);
    Parameter g = random_param("gamma", {5}, rng, 0.5, 1.5);
    Parameter b = random_param("beta", {5}, rng);
    const Tensor mix = random_tensor({5, 1}, rng);
    std::vector<Parameter*> ps{&x, &g, &b};
    const auto report = check_gradients(ps, [&] { return sum(matmul(layer_norm(x.use(), g.use(), b.use()), mix)); });
    EXPECT_LE(report.max_rel_error, 1e-4) << "seed " << seed << " " << report.worst;
  }
}

// --- softmax -----------------------------------------------------------

TEST(Softmax, SymmetryAndStability) {
  expect_values(softmax_rows(Tensor::vector({0, 0})), {0.5, 0.5});
  expect_values(softmax_rows(Tensor::vector({1000, 1000})), {0.5, 0.5});
}

TEST(Softmax, ScalarOracle) {
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  const Tensor s = softmax_rows(Tensor::vector({1, 2, 3}));
  expect_values(s, {std::exp(1.0) / z, std::exp(2.0) / z, std::exp(3.0) / z}, 1e-15);
  EXPECT_NEAR(s[0] + s[1] + s[2], 1.0, 1e-12);
}

TEST(Softmax, RowsSumToOneForLargeInputs) {
  Xoshiro256pp rng(5);
  const Tensor x = random_tensor({50, 17}, rng, -1e4, 1e4);
  const Tensor s = softmax_rows(x);
  for (std::size_t i = 0; i < 50; ++i) {
    double total = 0;
    for (std::size_t j = 0; j < 17; ++j) {
      ASSERT_FALSE(std::isnan(s.at(i, j)));
      total += s.at(i, j);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Softmax, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Xoshiro256pp rng(200 + seed);
    Parameter x = random_param("x", {4, 6}, rng, -3, 3);
    const Tensor mix = random_tensor({6, 1}, rng);
    std::vector<Parameter*> ps{&x};
    const auto report = check_gradients(ps, [&] { return sum(matmul(softmax_rows(x.use()), mix)); });
    EXPECT_LE(report.max_rel_error, 1e-4) << report.worst;
  }
}

// --- gelu / elementwise ------------------------------------------------

TEST(Gelu, KnownValuesAndGradient) {
  const Tensor y = gelu(Tensor::vector({0.0, 1.0, -1.0}));
  expect_values(y, {0.0, 0.8413447460685429, -0.15865525393145707}, 1e-12);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Xoshiro256pp rng(300 + seed);
    Parameter x = random_param("x", {3, 4}, rng, -3, 3);
    const Tensor mix = random_tensor({4, 1}, rng);
    std::vector<Parameter*> ps{&x};
    const auto report = check_gradients(ps, [&] { return sum(matmul(gelu(x.use()), mix)); });
    EXPECT_LE(report.max_rel_error, 1e-4) << report.worst;
  }
}

TEST(Elementwise, AddBiasTiledScaleGradients) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Xoshiro256pp rng(400 + seed);
    Parameter x = random_param("x", {6, 3}, rng);
    Parameter y = random_param("y", {6, 3}, rng);
    Parameter b = random_param("b", {3}, rng);
    Parameter t = random_param("table", {2, 3}, rng);
    const Tensor mix = random_tensor({3, 1}, rng);
    std::vector<Parameter*> ps{&x, &y, &b, &t};
    const auto report = check_gradients(ps, [&] {
      const Tensor z = add_tiled(add_bias(add(x.use(), scale(y.use(), -1.7)), b.use()), t.use());
      return sum(matmul(gelu(z), mix));
    });
    EXPECT_LE(report.max_rel_error, 1e-4) << report.worst;
  }
  EXPECT_THROW(add(Tensor::zeros({2, 2}), Tensor::zeros({2, 3})), ShapeError);
  EXPECT_THROW(add_tiled(Tensor::zeros({5, 3}), Tensor::zeros({2, 3})), ShapeError);
}

// --- attention ---------------------------------------------------------

namespace {

struct AttnParams {
  Parameter wq, wk, wv, wo, bo;
  AttentionWeights use() { return {wq.use(), wk.use(), wv.use(), wo.use(), bo.use()}; }
  std::vector<Parameter*> all() { return {&wq, &wk, &wv, &wo, &bo}; }
};

AttnParams random_attention(std::size_t d, Xoshiro256pp& rng) {
  return {random_param("Wq", {d, d}, rng), random_param("Wk", {d, d}, rng), random_param("Wv", {d, d}, rng),
          random_param("Wo", {d, d}, rng), random_param("bo", {d}, rng)};
}

}  // namespace

TEST(Attention, SingleTokenReducesToValueProjection) {
  Xoshiro256pp rng(9);
  auto w = random_attention(8, rng);
  const Tensor x = random_tensor({1, 8}, rng);
  const Tensor out = multi_head_attention(x, w.use(), 2, 1);
  const Tensor expected = dense(matmul(x, w.wv.value()), w.wo.value(), w.bo.value());
  EXPECT_LE(max_abs_diff(out, expected), 1e-12);
}

TEST(Attention, RowPermutationEquivariance) {
  Xoshiro256pp rng(10);
  auto w = random_attention(8, rng);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = random_tensor({7, 8}, rng, -2, 2);
    const auto perm = shuffled_indices(7, rng);
    const Tensor a = permute_rows(multi_head_attention(x, w.use(), 2, 7), perm);
    const Tensor b = multi_head_attention(permute_rows(x, perm), w.use(), 2, 7);
    EXPECT_LE(max_abs_diff(a, b), 1e-10);
  }
}

TEST(Attention, GroupsDoNotInteract) {
  Xoshiro256pp rng(12);
  auto w = random_attention(4, rng);
  const Tensor x1 = random_tensor({3, 4}, rng);
  const Tensor x2 = random_tensor({3, 4}, rng);
  const Tensor both = multi_head_attention(stack_rows(std::vector<Tensor>{x1, x2}), w.use(), 2, 3);
  EXPECT_LE(max_abs_diff(slice_rows(both, 0, 3), multi_head_attention(x1, w.use(), 2, 3)), 1e-12);
  EXPECT_LE(max_abs_diff(slice_rows(both, 3, 6), multi_head_attention(x2, w.use(), 2, 3)), 1e-12);
}

TEST(Attention, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Xoshiro256pp rng(500 + seed);
    auto w = random_attention(8, rng);
    Parameter x = random_param("x", {4, 8}, rng);
    const Tensor mix = random_tensor({8, 1}, rng);
    auto ps = w.all();
    ps.push_back(&x);
    const auto report =
        check_gradients(ps, [&] { return sum(matmul(multi_head_attention(x.use(), w.use(), 2, 4), mix)); });
    EXPECT_LE(report.max_rel_error, 1e-5) << "seed " << seed << " " << report.worst;
  }
}

TEST(Attention, HeadsMustDivideWidth) {
  Xoshiro256pp rng(13);
  auto w = random_attention(6, rng);
  EXPECT_THROW(multi_head_attention(Tensor::zeros({2, 6}), w.use(), 4, 2), ConfigError);
}

// --- gap ---------------------------------------------------------------

TEST(Gap, MeanOverTokens) {
  expect_values(gap(Tensor::matrix({{1, 2}, {3, 4}})), {2, 3});
  expect_values(gap(Tensor::matrix({{7, -1, 2}})), {7, -1, 2});
  expect_values(gap(Tensor::matrix({{1, 2}, {3, 4}, {5, 6}, {7, 8}}), 2), {2, 3, 6, 7});
  EXPECT_THROW(gap(Tensor()), ShapeError);
}

TEST(Gap, PermutationInvariant) {
  Xoshiro256pp rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = random_tensor({9, 5}, rng, -10, 10);
    const auto perm = shuffled_indices(9, rng);
    const Tensor a = gap(x), b = gap(permute_rows(x, perm));
    for (std::size_t j = 0; j < 5; ++j) EXPECT_LE(verify::relative_error(a[j], b[j], 1e-300), 1e-12);
  }
}

TEST(Gap, GradientMatchesFiniteDifferences) {
  Xoshiro256pp rng(15);
  Parameter x = random_param("x", {6, 3}, rng);
  const Tensor mix = random_tensor({3, 1}, rng);
  std::vector<Parameter*> ps{&x};
  const auto report = check_gradients(ps, [&] { return sum(matmul(gelu(gap(x.use(), 3)), mix)); });
  EXPECT_LE(report.max_rel_error, 1e-6) << report.worst;
}

// --- dropout -----------------------------------------------------------

TEST(Dropout, IdentityCases) {
  Xoshiro256pp rng(16);
  const Tensor x = random_tensor({4, 4}, rng);
  EXPECT_EQ(max_abs_diff(dropout(x, 0.0, Mode::train, &rng), x), 0.0);
  EXPECT_EQ(max_abs_diff(dropout(x, 0.0, Mode::eval, nullptr), x), 0.0);
  EXPECT_EQ(max_abs_diff(dropout(x, 0.1, Mode::eval, nullptr), x), 0.0);
}

TEST(Dropout, RateOutOfRangeRejected) {
  const Tensor x = Tensor::zeros({2, 2});
  Xoshiro256pp rng(1);
  EXPECT_THROW(dropout(x, 1.0, Mode::train, &rng), ConfigError);
  EXPECT_THROW(dropout(x, -0.1, Mode::eval, &rng), ConfigError);
}

TEST(Dropout, MonteCarloMeanPreserved) {
  Xoshiro256pp rng(17);
  const Tensor x = random_tensor({1, 8}, rng, 0.5, 2.0);
  std::vector<double> acc(8, 0.0);
  const int masks = 10000;
  for (int m = 0; m < masks; ++m) {
    const Tensor y = dropout(x, 0.5, Mode::train, &rng);
    for (std::size_t j = 0; j < 8; ++j) acc[j] += y[j];
  }
  for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(acc[j] / masks, x[j], 0.02 * x[j]);
}

TEST(Dropout, SameSeedSameMask) {
  const Tensor x = Tensor::full({10, 10}, 1.0);
  Xoshiro256pp r1(42), r2(42);
  EXPECT_EQ(max_abs_diff(dropout(x, 0.3, Mode::train, &r1), dropout(x, 0.3, Mode::train, &r2)), 0.0);
}

// --- sigmoid_bce -------------------------------------------------------

TEST(SigmoidBce, AnalyticAndStableValues) {
  EXPECT_NEAR(sigmoid_bce(Tensor({1, 1}, {0.0}), Tensor({1, 1}, {1.0})).item(), std::log(2.0), 1e-15);
  const double big = sigmoid_bce(Tensor({1, 1}, {40.0}), Tensor({1, 1}, {1.0})).item();
  EXPECT_LT(big, 1e-15);
  EXPECT_TRUE(std::isfinite(big));
  EXPECT_TRUE(std::isfinite(sigmoid_bce(Tensor({1, 1}, {-800.0}), Tensor({1, 1}, {1.0})).item()));
}

TEST(SigmoidBce, RejectsNonBinaryLabels) {
  EXPECT_THROW(sigmoid_bce(Tensor({2, 1}, {0.0, 1.0}), Tensor({2, 1}, {1.0, 0.5})), InputError);
}

TEST(SigmoidBce, DoublingPositiveWeightDoublesPositiveTerm) {
  const Tensor z({3, 1}, {0.3, -1.1, 2.0});
  const Tensor y({3, 1}, {1.0, 0.0, 1.0});
  const Tensor neg_only({1, 1}, {-1.1}), neg_label({1, 1}, {0.0});
  const double neg = sigmoid_bce(neg_only, neg_label).item() / 3.0;
  const double base = sigmoid_bce(z, y, {1.0, 1.0}).item();
  const double doubled = sigmoid_bce(z, y, {1.0, 2.0}).item();
  EXPECT_NEAR(doubled - neg, 2.0 * (base - neg), 1e-15);
}

TEST(SigmoidBce, GradientMatchesFiniteDifferences) {
  Xoshiro256pp rng(18);
  Parameter z = random_param("z", {4, 1}, rng, -3, 3);
  const Tensor y({4, 1}, {1, 0, 0, 1});
  std::vector<Parameter*> ps{&z};
  const auto report = check_gradients(ps, [&] { return sigmoid_bce(z.use(), y, {0.7, 1.6}); });
  EXPECT_LE(report.max_rel_error, 1e-6) << report.worst;
}

// --- backward ----------------------------------------------------------

TEST(Backward, SumOfParameterGivesOnes) {
  Parameter w("W", Tensor::matrix({{1, 2}, {3, 4}}));
  Tape tape;
  TapeScope scope(tape);
  tape.backward(sum(w.use()));
  for (double g : w.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, UnusedParameterGradIsZeroAndRepeatAccumulates) {
  Parameter used("used", Tensor::matrix({{1, 2}}));
  Parameter unused("unused", Tensor::matrix({{3, 4}}));
  Tape tape;
  TapeScope scope(tape);
  (void)unused.use();
  const Tensor loss = sum(scale(used.use(), 3.0));
  tape.backward(loss);
  for (double g : unused.grad()) EXPECT_EQ(g, 0.0);
  tape.backward(loss);
  for (double g : used.grad()) EXPECT_EQ(g, 6.0);
}

TEST(Backward, NonScalarLossRejected) {
  Parameter w("W", Tensor::matrix({{1, 2}}));
  Tape tape;
  TapeScope scope(tape);
  EXPECT_THROW(tape.backward(scale(w.use(), 2.0)), ContractError);
  EXPECT_THROW(tape.backward(Tensor({1}, {1.0})), ContractError);
}

TEST(Tape, ParentsPrecedeChildren) {
  Xoshiro256pp rng(19);
  Parameter a = random_param("a", {3, 3}, rng);
  Tape tape;
  TapeScope scope(tape);
  (void)sum(gelu(matmul(a.use(), a.use())));
  for (std::size_t i = 0; i < tape.size(); ++i)
    for (std::size_t p : tape.node(i).parents) EXPECT_LT(p, i);
}

TEST(Determinism, IdenticalSeedsBitIdentical) {
  auto run = [] {
    Xoshiro256pp rng(77);
    auto w = random_attention(8, rng);
    const Tensor x = random_tensor({5, 8}, rng);
    return dropout(multi_head_attention(x, w.use(), 2, 5), 0.2, Mode::train, &rng);
  };
  const Tensor a = run(), b = run();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}
