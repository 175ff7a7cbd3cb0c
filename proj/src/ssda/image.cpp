#include <algorithm>
#include <cmath>

#include "zachvit/errors.h"
#include "zachvit/image.h"

namespace zachvit {

FloatImage crop(const FloatImage& image, const Roi& roi) {
  if (roi.width == 0 || roi.height == 0 || roi.x + roi.width > image.width ||
      roi.y + roi.height > image.height) {
    throw InputError("crop: roi [" + std::to_string(roi.x) + "," + std::to_string(roi.y) + "," +
                     std::to_string(roi.width) + "," + std::to_string(roi.height) +
                     "] exceeds image " + std::to_string(image.width) + "x" + std::to_string(image.height));
  }
  FloatImage out(roi.width, roi.height);
  for (std::size_t y = 0; y < roi.height; ++y) {
    std::copy_n(image.pixels.begin() + static_cast<std::ptrdiff_t>((roi.y + y) * image.width + roi.x),
                roi.width, out.pixels.begin() + static_cast<std::ptrdiff_t>(y * roi.width));
  }
  return out;
}

namespace {

struct Tap {
  std::size_t first = 0;
  std::vector<double> weights;
};

// Per-output-sample source taps along one axis.
std::vector<Tap> triangle_taps(std::size_t in, std::size_t out) {
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  const double filter_scale = std::max(scale, 1.0);
  const double support = filter_scale;
  std::vector<Tap> taps(out);
  for (std::size_t i = 0; i < out; ++i) {
    const double center = (static_cast<double>(i) + 0.5) * scale;
    const auto lo = static_cast<long long>(std::max(0.0, std::floor(center - support)));
    const auto hi = static_cast<long long>(std::min(static_cast<double>(in), std::ceil(center + support)));
    Tap& t = taps[i];
    t.first = static_cast<std::size_t>(lo);
    double total = 0.0;
    for (long long j = lo; j < hi; ++j) {
      const double dist = (static_cast<double>(j) + 0.5 - center) / filter_scale;
      const double w = std::max(0.0, 1.0 - std::abs(dist));
      t.weights.push_back(w);
      total += w;
    }
    if (total <= 0.0) {
      // Degenerate only when in == out == 1 style edge cases; fall back to nearest.
      t.weights.assign(1, 1.0);
      t.first = std::min(static_cast<std::size_t>(center), in - 1);
    } else {
      for (auto& w : t.weights) w /= total;
    }
  }
  return taps;
}

}  // namespace

FloatImage resize_bilinear(const FloatImage& image, std::size_t width, std::size_t height) {
  if (image.width == 0 || image.height == 0 || width == 0 || height == 0) {
    throw ShapeError("resize: empty image or target");
  }
  if (image.width == width && image.height == height) return image;
  const auto xt = triangle_taps(image.width, width);
  const auto yt = triangle_taps(image.height, height);
  FloatImage tmp(width, image.height);
  for (std::size_t y = 0; y < image.height; ++y) {
    const double* row = image.pixels.data() + y * image.width;
    for (std::size_t x = 0; x < width; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < xt[x].weights.size(); ++k) acc += xt[x].weights[k] * row[xt[x].first + k];
      tmp.at(x, y) = acc;
    }
  }
  FloatImage out(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < yt[y].weights.size(); ++k) acc += yt[y].weights[k] * tmp.at(x, yt[y].first + k);
      out.at(x, y) = acc;
    }
  }
  return out;
}

FloatImage hconcat(std::span<const FloatImage> images) {
  if (images.empty()) throw ShapeError("hconcat: no images");
  const std::size_t h = images.front().height;
  std::size_t w = 0;
  for (const auto& im : images) {
    if (im.height != h) throw ShapeError("hconcat: heights differ");
    w += im.width;
  }
  FloatImage out(w, h);
  std::size_t x0 = 0;
  for (const auto& im : images) {
    for (std::size_t y = 0; y < h; ++y)
      std::copy_n(im.pixels.begin() + static_cast<std::ptrdiff_t>(y * im.width), im.width,
                  out.pixels.begin() + static_cast<std::ptrdiff_t>(y * w + x0));
    x0 += im.width;
  }
  return out;
}

FloatImage vconcat(std::span<const FloatImage> images) {
  if (images.empty()) throw ShapeError("vconcat: no images");
  const std::size_t w = images.front().width;
  FloatImage out;
  out.width = w;
  for (const auto& im : images) {
    if (im.width != w) throw ShapeError("vconcat: widths differ");
    out.pixels.insert(out.pixels.end(), im.pixels.begin(), im.pixels.end());
    out.height += im.height;
  }
  return out;
}

FloatImage to_float(const GrayImage& image) {
  FloatImage out(image.width, image.height);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) out.pixels[i] = image.pixels[i] / 255.0;
  return out;
}

GrayImage quantize(const FloatImage& image) {
  GrayImage out(image.width, image.height);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    const double v = std::clamp(image.pixels[i], 0.0, 1.0) * 255.0;
    out.pixels[i] = static_cast<std::uint8_t>(std::round(v));
  }
  return out;
}

}  // namespace zachvit
