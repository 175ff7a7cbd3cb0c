#include <algorithm>

#include "zachvit/errors.h"
#include "zachvit/model.h"

namespace zachvit {

namespace {
void check_geometry(std::size_t h, std::size_t w, std::size_t p) {
  if (p == 0 || h % p != 0 || w % p != 0) {
    throw ConfigError("patches: image " + std::to_string(h) + "x" + std::to_string(w) +
                      " is not divisible into " + std::to_string(p) + "-pixel patches");
  }
}
}  // namespace

Tensor extract_patches(const Tensor& image, std::size_t patch_size) {
  if (image.rank() != 3) throw ShapeError("extract_patches: expected [H x W x C], got " + shape_string(image.shape()));
  const std::size_t h = image.shape()[0], w = image.shape()[1], c = image.shape()[2];
  check_geometry(h, w, patch_size);
  const std::size_t gh = h / patch_size, gw = w / patch_size;
  const std::size_t dim = patch_size * patch_size * c;
  std::vector<double> out(gh * gw * dim);
  for (std::size_t py = 0; py < gh; ++py) {
    for (std::size_t px = 0; px < gw; ++px) {
      double* dst = out.data() + (py * gw + px) * dim;
      for (std::size_t r = 0; r < patch_size; ++r) {
        const double* src = image.data() + ((py * patch_size + r) * w + px * patch_size) * c;
        std::copy_n(src, patch_size * c, dst + r * patch_size * c);
      }
    }
  }
  return Tensor({gh * gw, dim}, std::move(out));
}

Tensor assemble_patches(const Tensor& patches, std::size_t height, std::size_t width,
                        std::size_t channels, std::size_t patch_size) {
  check_geometry(height, width, patch_size);
  const std::size_t gh = height / patch_size, gw = width / patch_size;
  const std::size_t dim = patch_size * patch_size * channels;
  if (patches.rank() != 2 || patches.rows() != gh * gw || patches.cols() != dim) {
    throw ShapeError("assemble_patches: " + shape_string(patches.shape()) + " does not tile " +
                     std::to_string(height) + "x" + std::to_string(width) + "x" +
                     std::to_string(channels));
  }
  std::vector<double> out(height * width * channels);
  for (std::size_t py = 0; py < gh; ++py) {
    for (std::size_t px = 0; px < gw; ++px) {
      const double* src = patches.data() + (py * gw + px) * dim;
      for (std::size_t r = 0; r < patch_size; ++r) {
        double* dst = out.data() + ((py * patch_size + r) * width + px * patch_size) * channels;
        std::copy_n(src + r * patch_size * channels, patch_size * channels, dst);
      }
    }
  }
  return Tensor({height, width, channels}, std::move(out));
}

Tensor gray_to_image(std::span<const double> gray, std::size_t height, std::size_t width,
                     std::size_t channels) {
  if (gray.size() != height * width) throw ShapeError("gray_to_image: pixel count mismatch");
  if (channels == 0) throw ConfigError("gray_to_image: zero channels");
  std::vector<double> out(height * width * channels);
  for (std::size_t i = 0; i < gray.size(); ++i)
    for (std::size_t ch = 0; ch < channels; ++ch) out[i * channels + ch] = gray[i];
  return Tensor({height, width, channels}, std::move(out));
}

Tensor stack_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("stack_rows: nothing to stack");
  const std::size_t c = parts.front().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.cols() != c) throw ShapeError("stack_rows: width mismatch");
    rows += p.rows();
  }
  std::vector<double> out;
  out.reserve(rows * c);
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  return Tensor({rows, c}, std::move(out));
}

}  // namespace zachvit
