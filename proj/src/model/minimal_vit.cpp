#include "zachvit/errors.h"
#include "zachvit/model.h"

namespace zachvit {

std::size_t MinimalVitConfig::patch_count() const {
  return (image_height / patch_size) * (image_width / patch_size);
}

void MinimalVitConfig::validate() const {
  if (patch_size == 0 || image_height == 0 || image_width == 0 || image_height % patch_size != 0 ||
      image_width % patch_size != 0) {
    throw ConfigError("minimal-vit: image " + std::to_string(image_height) + "x" +
                      std::to_string(image_width) + " is not divisible by patch size " +
                      std::to_string(patch_size));
  }
  if (depth == 0 || embed_dim == 0 || mlp_dim == 0 || channels == 0) {
    throw ConfigError("minimal-vit: depth, embed_dim, mlp_dim and channels must be positive");
  }
  if (heads == 0 || embed_dim % heads != 0) {
    throw ConfigError("minimal-vit: embed_dim " + std::to_string(embed_dim) +
                      " is not divisible by " + std::to_string(heads) + " heads");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("minimal-vit: dropout_rate must lie in [0, 1)");
  if (!(layer_norm_eps > 0.0)) throw ConfigError("minimal-vit: layer_norm_eps must be positive");
}

void to_json(nlohmann::json& j, const MinimalVitConfig& c) {
  j = {{"image_height", c.image_height}, {"image_width", c.image_width},
       {"channels", c.channels},         {"patch_size", c.patch_size},
       {"embed_dim", c.embed_dim},       {"depth", c.depth},
       {"heads", c.heads},               {"mlp_dim", c.mlp_dim},
       {"dropout_rate", c.dropout_rate}, {"layer_norm_eps", c.layer_norm_eps}};
}

void from_json(const nlohmann::json& j, MinimalVitConfig& c) {
  c.image_height = j.value("image_height", c.image_height);
  c.image_width = j.value("image_width", c.image_width);
  c.channels = j.value("channels", c.channels);
  c.patch_size = j.value("patch_size", c.patch_size);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.depth = j.value("depth", c.depth);
  c.heads = j.value("heads", c.heads);
  c.mlp_dim = j.value("mlp_dim", c.mlp_dim);
  c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
  c.layer_norm_eps = j.value("layer_norm_eps", c.layer_norm_eps);
}

MinimalVit::MinimalVit(MinimalVitConfig config, std::uint64_t seed)
    : VitModel(seed), config_(std::move(config)) {
  config_.validate();
  const std::size_t d = config_.embed_dim;
  params_.create("patch_embed/W", {config_.patch_dim(), d}, Init::glorot_uniform);
  params_.create("patch_embed/b", {d}, Init::zeros);
  params_.create("pos_embed", {config_.patch_count(), d}, Init::normal_002);
  for (std::size_t l = 0; l < config_.depth; ++l) {
    const std::string p = "block" + std::to_string(l);
    params_.create(p + "/ln1/gamma", {d}, Init::ones);
    params_.create(p + "/ln1/beta", {d}, Init::zeros);
    for (const char* w : {"/attn/Wq", "/attn/Wk", "/attn/Wv", "/attn/Wo"}) {
      params_.create(p + w, {d, d}, Init::glorot_uniform);
    }
    params_.create(p + "/attn/bo", {d}, Init::zeros);
    params_.create(p + "/ln2/gamma", {d}, Init::ones);
    params_.create(p + "/ln2/beta", {d}, Init::zeros);
    params_.create(p + "/mlp/fc1/W", {d, config_.mlp_dim}, Init::glorot_uniform);
    params_.create(p + "/mlp/fc1/b", {config_.mlp_dim}, Init::zeros);
    params_.create(p + "/mlp/fc2/W", {config_.mlp_dim, d}, Init::glorot_uniform);
    params_.create(p + "/mlp/fc2/b", {d}, Init::zeros);
  }
  params_.create("final_ln/gamma", {d}, Init::ones);
  params_.create("final_ln/beta", {d}, Init::zeros);
  params_.create("head/W", {d, 1}, Init::glorot_uniform);
  params_.create("head/b", {1}, Init::zeros);
}

Geometry MinimalVit::geometry() const {
  return {config_.image_height, config_.image_width, config_.channels, config_.patch_size};
}

nlohmann::json MinimalVit::config_json() const { return config_; }

Tensor MinimalVit::forward_patches(const Tensor& patches, std::size_t batch, Mode mode,
                                   Xoshiro256pp* rng) {
  check_patches(patches, batch);
  const std::size_t tokens = patches.rows() / batch;
  if (tokens != config_.patch_count()) {
    throw ConfigError("minimal-vit: " + std::to_string(tokens) + " tokens per image, positional table has " +
                      std::to_string(config_.patch_count()));
  }
  auto P = [this](const std::string& name) { return params_.at(name).use(); };
  const double eps = config_.layer_norm_eps;

  Tensor z = add_tiled(dense(patches, P("patch_embed/W"), P("patch_embed/b")), P("pos_embed"));
  for (std::size_t l = 0; l < config_.depth; ++l) {
    const std::string p = "block" + std::to_string(l);
    const Tensor y = layer_norm(z, P(p + "/ln1/gamma"), P(p + "/ln1/beta"), eps);
    const AttentionWeights w{P(p + "/attn/Wq"), P(p + "/attn/Wk"), P(p + "/attn/Wv"),
                             P(p + "/attn/Wo"), P(p + "/attn/bo")};
    z = add(z, dropout(multi_head_attention(y, w, config_.heads, tokens), config_.dropout_rate, mode, rng));
    const Tensor y2 = layer_norm(z, P(p + "/ln2/gamma"), P(p + "/ln2/beta"), eps);
    Tensor h = gelu(dense(y2, P(p + "/mlp/fc1/W"), P(p + "/mlp/fc1/b")));
    h = dense(h, P(p + "/mlp/fc2/W"), P(p + "/mlp/fc2/b"));
    z = add(z, dropout(h, config_.dropout_rate, mode, rng));
  }
  z = layer_norm(z, P("final_ln/gamma"), P("final_ln/beta"), eps);
  return dense(gap(z, tokens), P("head/W"), P("head/b"));
}

std::unique_ptr<VitModel> make_model(const std::string& kind, const nlohmann::json& config,
                                     std::uint64_t seed) {
  if (kind == "zachvit") return std::make_unique<ZachVit>(config.get<ZachVitConfig>(), seed);
  if (kind == "minimal-vit" || kind == "minimal_vit") {
    return std::make_unique<MinimalVit>(config.get<MinimalVitConfig>(), seed);
  }
  throw ConfigError("unknown model kind '" + kind + "' (expected zachvit or minimal-vit)");
}

}  // namespace zachvit
