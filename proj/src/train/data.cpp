#include "zachvit/errors.h"
#include "zachvit/train.h"

namespace zachvit {

namespace fs = std::filesystem;

std::vector<int> StrideSet::labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

StrideSet load_split(const fs::path& dataset_dir, Split split) {
  const fs::path manifest = dataset_dir / "manifest.json";
  if (!fs::exists(manifest)) throw InputError("no augmented manifest at " + manifest.string());
  return load_split(AugmentedManifest::load(manifest), dataset_dir, split);
}

StrideSet load_split(const AugmentedManifest& manifest, const fs::path& dataset_dir, Split split) {
  StrideSet set;
  set.width = manifest.geometry.width;
  set.height = manifest.geometry.height();
  for (const auto& e : manifest.images) {
    if (e.split != split) continue;
    GrayImage im = read_pgm((dataset_dir / e.file).string());
    if (im.width != set.width || im.height != set.height) {
      throw InputError(e.file + " is " + std::to_string(im.width) + "x" + std::to_string(im.height) +
                       ", manifest geometry is " + std::to_string(set.width) + "x" + std::to_string(set.height));
    }
    set.samples.push_back({std::move(im.pixels), e.label, e.file, e.source_patient});
  }
  return set;
}

void check_set_geometry(const StrideSet& set, const Geometry& g) {
  if (set.width != g.width || set.height != g.height) {
    throw ConfigError("data geometry " + std::to_string(set.width) + "x" + std::to_string(set.height) +
                      " does not match model geometry " + std::to_string(g.width) + "x" + std::to_string(g.height));
  }
}

Tensor batch_patches(const StrideSet& set, std::span<const std::size_t> indices, const Geometry& g) {
  check_set_geometry(set, g);
  if (indices.empty()) throw ShapeError("batch_patches: empty batch");
  const std::size_t p = g.patch_size, c = g.channels;
  const std::size_t gw = g.width / p, n = g.patch_count(), dim = g.patch_dim();
  std::vector<double> out(indices.size() * n * dim);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& px = set.samples.at(indices[b]).pixels;
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t y0 = (t / gw) * p, x0 = (t % gw) * p;
      double* dst = out.data() + (b * n + t) * dim;
      for (std::size_t r = 0; r < p; ++r) {
        for (std::size_t col = 0; col < p; ++col) {
          const double v = px[(y0 + r) * g.width + x0 + col] / 255.0;
          for (std::size_t ch = 0; ch < c; ++ch) *dst++ = v;
        }
      }
    }
  }
  return Tensor({indices.size() * n, dim}, std::move(out));
}

}  // namespace zachvit
