#include <string>

#include "zachvit/errors.h"
#include "zachvit/model.h"
#include "zachvit/tape.h"

namespace zachvit {

namespace {
std::string block_prefix(std::size_t l) { return "block" + std::to_string(l); }
}  // namespace

std::size_t ZachVitConfig::patch_count() const {
  return (image_height / patch_size) * (image_width / patch_size);
}

std::size_t ZachVitConfig::block_input_width(std::size_t l) const {
  return l == 0 ? embed_dim : block_units.at(l - 1);
}

void ZachVitConfig::validate() const {
  if (patch_size == 0 || image_height == 0 || image_width == 0 || image_height % patch_size != 0 ||
      image_width % patch_size != 0) {
    throw ConfigError("zachvit: image " + std::to_string(image_height) + "x" +
                      std::to_string(image_width) + " is not divisible by patch size " +
                      std::to_string(patch_size));
  }
  if (channels == 0 || embed_dim == 0) throw ConfigError("zachvit: channels and embed_dim must be positive");
  if (block_units.empty()) throw ConfigError("zachvit: block_units must not be empty");
  if (heads_per_block.size() != block_units.size()) {
    throw ConfigError("zachvit: heads_per_block has " + std::to_string(heads_per_block.size()) +
                      " entries for " + std::to_string(block_units.size()) + " blocks");
  }
  for (std::size_t l = 0; l < block_units.size(); ++l) {
    const std::size_t width = block_input_width(l);
    if (block_units[l] == 0) throw ConfigError("zachvit: zero block width");
    if (heads_per_block[l] == 0 || width % heads_per_block[l] != 0) {
      throw ConfigError("zachvit: block " + std::to_string(l) + " input width " +
                        std::to_string(width) + " is not divisible by " +
                        std::to_string(heads_per_block[l]) + " heads");
    }
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("zachvit: dropout_rate must lie in [0, 1)");
  if (!(layer_norm_eps > 0.0)) throw ConfigError("zachvit: layer_norm_eps must be positive");
}

void to_json(nlohmann::json& j, const ZachVitConfig& c) {
  j = {{"image_height", c.image_height},   {"image_width", c.image_width},
       {"channels", c.channels},           {"patch_size", c.patch_size},
       {"embed_dim", c.embed_dim},         {"block_units", c.block_units},
       {"heads_per_block", c.heads_per_block}, {"dropout_rate", c.dropout_rate},
       {"mlp_dropout", c.mlp_dropout},     {"mlp_gelu", c.mlp_gelu},
       {"layer_norm_eps", c.layer_norm_eps}};
}

void from_json(const nlohmann::json& j, ZachVitConfig& c) {
  c.image_height = j.value("image_height", c.image_height);
  c.image_width = j.value("image_width", c.image_width);
  c.channels = j.value("channels", c.channels);
  c.patch_size = j.value("patch_size", c.patch_size);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.block_units = j.value("block_units", c.block_units);
  c.heads_per_block = j.value("heads_per_block", c.heads_per_block);
  c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
  c.mlp_dropout = j.value("mlp_dropout", c.mlp_dropout);
  c.mlp_gelu = j.value("mlp_gelu", c.mlp_gelu);
  c.layer_norm_eps = j.value("layer_norm_eps", c.layer_norm_eps);
}

void VitModel::check_patches(const Tensor& patches, std::size_t batch) const {
  const Geometry g = geometry();
  if (batch == 0 || patches.rank() != 2 || patches.cols() != g.patch_dim() ||
      patches.rows() % batch != 0) {
    throw ConfigError(kind() + ": patch matrix " + shape_string(patches.shape()) +
                      " does not match batch " + std::to_string(batch) + " of " +
                      std::to_string(g.patch_dim()) + "-wide patches");
  }
}

Tensor VitModel::forward(std::span<const Tensor> images, Mode mode, Xoshiro256pp* rng) {
  const Geometry g = geometry();
  std::vector<Tensor> parts;
  parts.reserve(images.size());
  for (const auto& img : images) {
    if (img.shape() != Shape{g.height, g.width, g.channels}) {
      throw ConfigError(kind() + ": image " + shape_string(img.shape()) + " does not match model geometry " +
                        shape_string({g.height, g.width, g.channels}));
    }
    parts.push_back(extract_patches(img, g.patch_size));
  }
  return forward_patches(stack_rows(parts), images.size(), mode, rng);
}

Tensor VitModel::forward(const Tensor& image, Mode mode, Xoshiro256pp* rng) {
  return forward(std::span<const Tensor>(&image, 1), mode, rng);
}

ZachVit::ZachVit(ZachVitConfig config, std::uint64_t seed) : VitModel(seed), config_(std::move(config)) {
  config_.validate();
  params_.create("patch_embed/W", {config_.patch_dim(), config_.embed_dim}, Init::glorot_uniform);
  params_.create("patch_embed/b", {config_.embed_dim}, Init::zeros);
  for (std::size_t l = 0; l < config_.block_units.size(); ++l) {
    const std::string p = block_prefix(l);
    const std::size_t d = config_.block_input_width(l);
    const std::size_t u = config_.block_units[l];
    params_.create(p + "/ln1/gamma", {d}, Init::ones);
    params_.create(p + "/ln1/beta", {d}, Init::zeros);
    for (const char* w : {"/attn/Wq", "/attn/Wk", "/attn/Wv", "/attn/Wo"}) {
      params_.create(p + w, {d, d}, Init::glorot_uniform);
    }
    params_.create(p + "/attn/bo", {d}, Init::zeros);
    params_.create(p + "/ln2/gamma", {d}, Init::ones);
    params_.create(p + "/ln2/beta", {d}, Init::zeros);
    params_.create(p + "/dense/W", {d, u}, Init::glorot_uniform);
    params_.create(p + "/dense/b", {u}, Init::zeros);
    blocks_.push_back(Block{p, config_.heads_per_block[l], AdaptiveAdd(params_, p + "/attn_residual"),
                            AdaptiveAdd(params_, p + "/mlp_residual")});
  }
  const std::size_t last = config_.block_units.back();
  params_.create("head/W", {last, 1}, Init::glorot_uniform);
  params_.create("head/b", {1}, Init::zeros);

  // Materialize lazily created residual projections with a one-token pass.
  // A scratch tape keeps this pass off any tape the caller has active.
  Tape scratch;
  TapeScope scope(scratch);
  forward_patches(Tensor::zeros({1, config_.patch_dim()}), 1, Mode::eval, nullptr);
}

Geometry ZachVit::geometry() const {
  return {config_.image_height, config_.image_width, config_.channels, config_.patch_size};
}

nlohmann::json ZachVit::config_json() const { return config_; }

Tensor ZachVit::forward_patches(const Tensor& patches, std::size_t batch, Mode mode, Xoshiro256pp* rng) {
  check_patches(patches, batch);
  const std::size_t tokens = patches.rows() / batch;
  auto P = [this](const std::string& name) { return params_.at(name).use(); };

  Tensor z = dense(patches, P("patch_embed/W"), P("patch_embed/b"));
  for (auto& block : blocks_) {
    const std::string& p = block.prefix;
    const Tensor y = layer_norm(z, P(p + "/ln1/gamma"), P(p + "/ln1/beta"), config_.layer_norm_eps);
    const AttentionWeights w{P(p + "/attn/Wq"), P(p + "/attn/Wk"), P(p + "/attn/Wv"),
                             P(p + "/attn/Wo"), P(p + "/attn/bo")};
    Tensor a = multi_head_attention(y, w, block.heads, tokens);
    a = dropout(a, config_.dropout_rate, mode, rng);
    const Tensor mid = block.attn_residual(z, a);
    const Tensor y2 = layer_norm(mid, P(p + "/ln2/gamma"), P(p + "/ln2/beta"), config_.layer_norm_eps);
    Tensor f = dense(y2, P(p + "/dense/W"), P(p + "/dense/b"));
    if (config_.mlp_gelu) f = gelu(f);
    if (config_.mlp_dropout) f = dropout(f, config_.dropout_rate, mode, rng);
    z = block.mlp_residual(mid, f);
  }
  return dense(gap(z, tokens), P("head/W"), P("head/b"));
}

}  // namespace zachvit
