#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "zachvit/ops.h"
#include "zachvit/parameter.h"
#include "zachvit/tensor.h"

namespace zachvit {

class Xoshiro256pp;

// ---------------------------------------------------------------------------
// Patches

// [H x W x C] image -> [N x patch*patch*C], patches in row-major grid order,
// each flattened row-major over (row, col, channel).
Tensor extract_patches(const Tensor& image, std::size_t patch_size);

// Inverse of extract_patches.
Tensor assemble_patches(const Tensor& patches, std::size_t height, std::size_t width,
                        std::size_t channels, std::size_t patch_size);

// Gray [H x W] values replicated into a [H x W x channels] image tensor.
Tensor gray_to_image(std::span<const double> gray, std::size_t height, std::size_t width,
                     std::size_t channels);

// Row-wise concatenation of equally wide matrices.
Tensor stack_rows(std::span<const Tensor> parts);

// ---------------------------------------------------------------------------
// AdaptiveAdd

// Residual sum that inserts a learned Dense projection of x when the widths
// of x and y differ. The projection parameters ("<site>/proj/W", "<site>/proj/b")
// are created in the store on first mismatched call and reused afterwards.
class AdaptiveAdd {
 public:
  AdaptiveAdd(ParameterStore& store, std::string site) : store_(&store), site_(std::move(site)) {}

  Tensor operator()(const Tensor& x, const Tensor& y);
  bool has_projection() const { return weight_ != nullptr; }
  const std::string& site() const { return site_; }

 private:
  ParameterStore* store_;
  std::string site_;
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
};

// ---------------------------------------------------------------------------
// Configurations

struct ZachVitConfig {
  std::size_t image_height = 224;
  std::size_t image_width = 224;
  std::size_t channels = 3;
  std::size_t patch_size = 16;
  std::size_t embed_dim = 128;
  std::vector<std::size_t> block_units{96, 64, 64};
  std::vector<std::size_t> heads_per_block{4, 4, 4};
  double dropout_rate = 0.1;
  bool mlp_dropout = false;  // also drop after the block Dense
  bool mlp_gelu = false;     // GELU after the block Dense
  double layer_norm_eps = 1e-5;

  std::size_t patch_count() const;
  std::size_t patch_dim() const { return patch_size * patch_size * channels; }
  // Width entering block l.
  std::size_t block_input_width(std::size_t l) const;
  void validate() const;
};

struct MinimalVitConfig {
  std::size_t image_height = 224;
  std::size_t image_width = 224;
  std::size_t channels = 3;
  std::size_t patch_size = 16;
  std::size_t embed_dim = 64;
  std::size_t depth = 8;
  std::size_t heads = 4;
  std::size_t mlp_dim = 384;
  double dropout_rate = 0.1;
  double layer_norm_eps = 1e-5;

  std::size_t patch_count() const;
  std::size_t patch_dim() const { return patch_size * patch_size * channels; }
  void validate() const;
};

void to_json(nlohmann::json& j, const ZachVitConfig& c);
void from_json(const nlohmann::json& j, ZachVitConfig& c);
void to_json(nlohmann::json& j, const MinimalVitConfig& c);
void from_json(const nlohmann::json& j, MinimalVitConfig& c);

struct Geometry {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::size_t patch_size = 0;

  std::size_t patch_count() const { return (height / patch_size) * (width / patch_size); }
  std::size_t patch_dim() const { return patch_size * patch_size * channels; }
  bool operator==(const Geometry&) const = default;
};

// ---------------------------------------------------------------------------
// Models

// Common interface of the two transformer classifiers. Both map a batch of
// images to one logit per image, shape [B x 1].
class VitModel {
 public:
  virtual ~VitModel() = default;

  virtual std::string kind() const = 0;
  virtual Geometry geometry() const = 0;
  virtual nlohmann::json config_json() const = 0;

  // patches: [B*N x patch_dim], N = rows / batch.
  virtual Tensor forward_patches(const Tensor& patches, std::size_t batch, Mode mode,
                                 Xoshiro256pp* rng) = 0;

  // images: [H x W x C] tensors matching geometry().
  Tensor forward(std::span<const Tensor> images, Mode mode, Xoshiro256pp* rng);
  Tensor forward(const Tensor& image, Mode mode, Xoshiro256pp* rng);

  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  std::size_t param_count() const { return params_.element_count(); }

 protected:
  explicit VitModel(std::uint64_t seed) : params_(seed) {}
  void check_patches(const Tensor& patches, std::size_t batch) const;

  ParameterStore params_;
};

// Zero-token transformer: patch embedding without positional terms, blocks
// of LayerNorm / attention / AdaptiveAdd / LayerNorm / Dense / AdaptiveAdd,
// global average pooling and a Dense(1) head.
class ZachVit final : public VitModel {
 public:
  explicit ZachVit(ZachVitConfig config, std::uint64_t seed = 0);

  std::string kind() const override { return "zachvit"; }
  Geometry geometry() const override;
  nlohmann::json config_json() const override;
  const ZachVitConfig& config() const { return config_; }

  Tensor forward_patches(const Tensor& patches, std::size_t batch, Mode mode,
                         Xoshiro256pp* rng) override;

 private:
  struct Block {
    std::string prefix;
    std::size_t heads;
    AdaptiveAdd attn_residual;
    AdaptiveAdd mlp_residual;
  };

  ZachVitConfig config_;
  std::vector<Block> blocks_;
};

// Pre-LN ViT baseline with a learnable positional table and a GAP head.
class MinimalVit final : public VitModel {
 public:
  explicit MinimalVit(MinimalVitConfig config, std::uint64_t seed = 0);

  std::string kind() const override { return "minimal-vit"; }
  Geometry geometry() const override;
  nlohmann::json config_json() const override;
  const MinimalVitConfig& config() const { return config_; }

  Tensor forward_patches(const Tensor& patches, std::size_t batch, Mode mode,
                         Xoshiro256pp* rng) override;

 private:
  MinimalVitConfig config_;
};

// Builds a model from its kind ("zachvit" | "minimal-vit") and config JSON.
std::unique_ptr<VitModel> make_model(const std::string& kind, const nlohmann::json& config,
                                     std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Checkpoints
//
// Layout: 8-byte magic "ZVCKPT01", u32 format version, u64 manifest length,
// manifest JSON (kind, config, dtype, parameter names/shapes/offsets), then
// the raw little-endian float64 parameter data.

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const VitModel& model, const std::string& path,
                     const nlohmann::json& extra = nlohmann::json::object());
std::unique_ptr<VitModel> load_checkpoint(const std::string& path);
nlohmann::json read_checkpoint_manifest(const std::string& path);

}  // namespace zachvit
