#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <regex>

#include "test_util.h"
#include "zachvit/errors.h"
#include "zachvit/model.h"
#include "zachvit/rng.h"
#include "zachvit/tape.h"
#include "zachvit/verify.h"

using namespace zachvit;
using zachvit::testing::max_abs_diff;
using zachvit::testing::random_param;
using zachvit::testing::random_tensor;

namespace {

ZachVitConfig tiny_zachvit() {
  ZachVitConfig c;
  c.image_height = 64;
  c.image_width = 64;
  c.channels = 1;
  c.embed_dim = 32;
  c.block_units = {32, 16};
  c.heads_per_block = {4, 4};
  return c;
}

double max_logit_deviation(VitModel& model, const Tensor& image, int permutations, Xoshiro256pp& rng) {
  const Geometry g = model.geometry();
  const Tensor patches = extract_patches(image, g.patch_size);
  const double base = model.forward_patches(patches, 1, Mode::eval, nullptr).item();
  double worst = 0.0;
  for (int i = 0; i < permutations; ++i) {
    const auto perm = shuffled_indices(patches.rows(), rng);
    const double logit = model.forward_patches(permute_rows(patches, perm), 1, Mode::eval, nullptr).item();
    worst = std::max(worst, std::abs(logit - base));
  }
  return worst;
}

}  // namespace

// --- patches -----------------------------------------------------------

TEST(Patches, DefaultGeometryShape) {
  const Tensor p = extract_patches(Tensor::zeros({224, 224, 3}), 16);
  EXPECT_EQ(p.shape(), (Shape{196, 768}));
}

TEST(Patches, TopLeftPatchIsTopLeftBlock) {
  Xoshiro256pp rng(1);
  const Tensor img = random_tensor({32, 32, 1}, rng);
  const Tensor p = extract_patches(img, 16);
  ASSERT_EQ(p.shape(), (Shape{4, 256}));
  for (std::size_t r = 0; r < 16; ++r)
    for (std::size_t c = 0; c < 16; ++c) EXPECT_EQ(p.at(0, r * 16 + c), img[r * 32 + c]);
  // second patch in row-major grid order starts at column 16
  EXPECT_EQ(p.at(1, 0), img[16]);
}

TEST(Patches, ReassemblyIsExact) {
  Xoshiro256pp rng(2);
  const Tensor img = random_tensor({48, 32, 3}, rng);
  const Tensor back = assemble_patches(extract_patches(img, 16), 48, 32, 3, 16);
  ASSERT_EQ(back.shape(), img.shape());
  for (std::size_t i = 0; i < img.size(); ++i) ASSERT_EQ(back[i], img[i]);
}

TEST(Patches, IndivisibleGeometryRejected) {
  EXPECT_THROW(extract_patches(Tensor::zeros({30, 32, 1}), 16), ConfigError);
}

// --- adaptive_add ------------------------------------------------------

TEST(AdaptiveAdd, EqualWidthsArePlainResidual) {
  ParameterStore store(1);
  AdaptiveAdd site(store, "res");
  Xoshiro256pp rng(3);
  const Tensor x = random_tensor({3, 8}, rng), y = random_tensor({3, 8}, rng);
  EXPECT_EQ(max_abs_diff(site(x, y), add(x, y)), 0.0);
  EXPECT_FALSE(site.has_projection());
  EXPECT_EQ(store.size(), 0u);
}

TEST(AdaptiveAdd, ProjectionCreatedOnceAndReused) {
  ParameterStore store(1);
  AdaptiveAdd site(store, "res");
  Xoshiro256pp rng(4);
  const Tensor x = random_tensor({5, 128}, rng), y = random_tensor({5, 96}, rng);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(site(x, y).shape(), (Shape{5, 96}));
  ASSERT_NE(store.find("res/proj/W"), nullptr);
  EXPECT_EQ(store.find("res/proj/W")->shape(), (Shape{128, 96}));
  const auto names = store.names();
  EXPECT_EQ(std::count(names.begin(), names.end(), "res/proj/W"), 1);
  EXPECT_EQ(store.size(), 2u);  // weight + bias
}

TEST(AdaptiveAdd, TokenCountMismatchRejected) {
  ParameterStore store(1);
  AdaptiveAdd site(store, "res");
  EXPECT_THROW(site(Tensor::zeros({2, 4}), Tensor::zeros({3, 4})), ShapeError);
}

TEST(AdaptiveAdd, GradientFlowsToBothInputs) {
  Xoshiro256pp rng(5);
  ParameterStore store(9);
  AdaptiveAdd site(store, "res");
  Parameter x = random_param("x", {2, 3}, rng);
  Parameter y = random_param("y", {2, 2}, rng);
  (void)site(x.value(), y.value());
  const Tensor mix = random_tensor({2, 1}, rng);
  std::vector<Parameter*> ps{&x, &y, &store.at("res/proj/W"), &store.at("res/proj/b")};
  const auto report = verify::check_gradients(ps, [&] { return sum(matmul(gelu(site(x.use(), y.use())), mix)); });
  EXPECT_LE(report.max_rel_error, 1e-6) << report.worst;
  for (double g : x.grad()) EXPECT_NE(g, 0.0);
  for (double g : y.grad()) EXPECT_NE(g, 0.0);
}

// --- ZACH-ViT ----------------------------------------------------------

TEST(ZachVit, NoPositionalTableOrClassToken) {
  ZachVit model(ZachVitConfig{}, 1);
  const std::regex banned("pos|cls", std::regex::icase);
  for (const auto& name : model.params().names()) EXPECT_FALSE(std::regex_search(name, banned)) << name;
}

TEST(ZachVit, DefaultParameterBudget) {
  ZachVit model(ZachVitConfig{}, 1);
  EXPECT_GE(model.param_count(), 225000u);
  EXPECT_LE(model.param_count(), 275000u);
  // Hand count for embed 128, blocks [96, 64, 64], 768-wide patches.
  EXPECT_EQ(model.param_count(), 260065u);
}

TEST(ZachVit, ParamCountIsSumOfElements) {
  ParameterStore store;
  store.create("d/W", {768, 128}, Init::glorot_uniform);
  store.create("d/b", {128}, Init::zeros);
  EXPECT_EQ(store.element_count(), 98432u);
}

TEST(ZachVit, ResidualProjectionsExistOnlyWhereWidthsChange) {
  ZachVit model(ZachVitConfig{}, 1);
  auto& p = model.params();
  EXPECT_EQ(p.find("block0/mlp_residual/proj/W")->shape(), (Shape{128, 96}));
  EXPECT_EQ(p.find("block1/mlp_residual/proj/W")->shape(), (Shape{96, 64}));
  EXPECT_EQ(p.find("block2/mlp_residual/proj/W"), nullptr);
  EXPECT_EQ(p.find("block0/attn_residual/proj/W"), nullptr);
}

TEST(ZachVit, ZeroImageGivesFiniteLogit) {
  ZachVit model(tiny_zachvit(), 2);
  EXPECT_TRUE(std::isfinite(model.forward(Tensor::zeros({64, 64, 1}), Mode::eval, nullptr).item()));
}

TEST(ZachVit, PatchPermutationSweep) {
  ZachVit model(tiny_zachvit(), 3);
  Xoshiro256pp rng(4);
  const Tensor img = random_tensor({64, 64, 1}, rng, 0, 1);
  EXPECT_LE(max_logit_deviation(model, img, 100, rng), 1e-10);
}

TEST(ZachVit, GeometryMismatchRejected) {
  ZachVit model(tiny_zachvit(), 2);
  EXPECT_THROW(model.forward(Tensor::zeros({32, 64, 1}), Mode::eval, nullptr), ConfigError);
  ZachVitConfig bad = tiny_zachvit();
  bad.image_height = 60;
  EXPECT_THROW(ZachVit(bad, 0), ConfigError);
  bad = tiny_zachvit();
  bad.heads_per_block = {3, 4};
  EXPECT_THROW(ZachVit(bad, 0), ConfigError);
}

TEST(ZachVit, TrainModeDropoutIsSeeded) {
  ZachVit model(tiny_zachvit(), 2);
  Xoshiro256pp data(1);
  const Tensor img = random_tensor({64, 64, 1}, data);
  Xoshiro256pp r1(5), r2(5);
  const double a = model.forward(img, Mode::train, &r1).item();
  const double b = model.forward(img, Mode::train, &r2).item();
  EXPECT_EQ(a, b);
  EXPECT_NE(a, model.forward(img, Mode::eval, nullptr).item());
}

TEST(ZachVit, EndToEndGradientCheck) {
  // 2 blocks, width 16, 9 tokens.
  ZachVitConfig c;
  c.image_height = 48;
  c.image_width = 48;
  c.channels = 1;
  c.embed_dim = 16;
  c.block_units = {16, 8};
  c.heads_per_block = {2, 2};
  c.mlp_gelu = true;  // exercise the optional activation as well
  ZachVit model(c, 6);
  Xoshiro256pp rng(7);
  std::vector<Tensor> images{random_tensor({48, 48, 1}, rng, 0, 1), random_tensor({48, 48, 1}, rng, 0, 1)};
  const Tensor labels({2, 1}, {1.0, 0.0});
  // Perturb LayerNorm affine terms and biases away from their init.
  for (Parameter* p : model.params().all()) {
    std::vector<double> v(p->value().values().begin(), p->value().values().end());
    for (auto& x : v) x += rng.uniform(-0.1, 0.1);
    p->assign(v);
  }
  auto params = model.params().all();
  const auto report = verify::check_gradients(
      params, [&] { return sigmoid_bce(model.forward(images, Mode::eval, nullptr), labels, {0.8, 1.3}); });
  EXPECT_LE(report.max_rel_error, 1e-4) << report.worst;
  EXPECT_GT(report.elements, 4000u);
}

// --- Minimal ViT -------------------------------------------------------

TEST(MinimalVit, DefaultParameterBudgetAndRatio) {
  MinimalVit baseline(MinimalVitConfig{}, 1);
  EXPECT_GE(baseline.param_count(), 558000u);
  EXPECT_LE(baseline.param_count(), 682000u);
  EXPECT_EQ(baseline.param_count(), 592385u);
  ZachVit model(ZachVitConfig{}, 1);
  EXPECT_LE(static_cast<double>(model.param_count()) / baseline.param_count(), 0.5);
  EXPECT_NE(baseline.params().find("pos_embed"), nullptr);
}

TEST(MinimalVit, PositionalTableBreaksPermutationInvariance) {
  MinimalVitConfig c;
  c.image_height = 64;
  c.image_width = 64;
  c.channels = 1;
  MinimalVit model(c, 3);
  Xoshiro256pp rng(8);
  const Tensor img = random_tensor({64, 64, 1}, rng, 0, 1);
  EXPECT_GT(max_logit_deviation(model, img, 100, rng), 1e-3);
}

TEST(MinimalVit, ZeroPositionalTableRestoresInvariance) {
  MinimalVitConfig c;
  c.image_height = 64;
  c.image_width = 64;
  c.channels = 1;
  MinimalVit model(c, 3);
  auto& pos = model.params().at("pos_embed");
  pos.assign(Tensor::zeros(pos.shape()));
  Xoshiro256pp rng(8);
  const Tensor img = random_tensor({64, 64, 1}, rng, 0, 1);
  EXPECT_LE(max_logit_deviation(model, img, 100, rng), 1e-10);
}

TEST(MinimalVit, GradientCheck) {
  MinimalVitConfig c;
  c.image_height = 32;
  c.image_width = 32;
  c.channels = 1;
  c.embed_dim = 8;
  c.depth = 2;
  c.heads = 2;
  c.mlp_dim = 12;
  MinimalVit model(c, 4);
  Xoshiro256pp rng(9);
  const Tensor img = random_tensor({32, 32, 1}, rng, 0, 1);
  auto params = model.params().all();
  const auto report = verify::check_gradients(params, [&] {
    return sigmoid_bce(model.forward(img, Mode::eval, nullptr), Tensor({1, 1}, {1.0}));
  });
  EXPECT_LE(report.max_rel_error, 1e-4) << report.worst;
}

// --- checkpoints -------------------------------------------------------

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto dir = std::filesystem::temp_directory_path() / "zachvit_ckpt_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.zvckpt").string();
  ZachVit model(tiny_zachvit(), 11);
  save_checkpoint(model, path, {{"note", "unit"}});
  auto loaded = load_checkpoint(path);
  ASSERT_EQ(loaded->kind(), "zachvit");
  ASSERT_EQ(loaded->params().names(), model.params().names());
  for (const Parameter* p : model.params().all()) {
    const auto& q = loaded->params().at(p->name());
    for (std::size_t i = 0; i < p->size(); ++i) ASSERT_EQ(p->value()[i], q.value()[i]) << p->name();
  }
  // Re-saving the loaded model reproduces the same bytes.
  const std::string again = (dir / "again.zvckpt").string();
  save_checkpoint(*loaded, again, {{"note", "unit"}});
  std::ifstream a(path, std::ios::binary), b(again, std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(sa, sb);
  EXPECT_EQ(read_checkpoint_manifest(path)["extra"]["note"], "unit");
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, RejectsGarbage) {
  const auto path = std::filesystem::temp_directory_path() / "zachvit_garbage.bin";
  std::ofstream(path) << "not a checkpoint";
  EXPECT_THROW(load_checkpoint(path.string()), InputError);
  std::filesystem::remove(path);
}
