#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace zachvit {

// 8-bit single-channel image, row-major.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(std::size_t w, std::size_t h, std::uint8_t fill = 0) : width(w), height(h), pixels(w * h, fill) {}

  std::uint8_t& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
  std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
  bool operator==(const GrayImage&) const = default;
};

// Single-channel image of doubles, row-major; pipeline images live in [0, 1].
struct FloatImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;

  FloatImage() = default;
  FloatImage(std::size_t w, std::size_t h, double fill = 0.0) : width(w), height(h), pixels(w * h, fill) {}

  double& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
  double at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
  bool operator==(const FloatImage&) const = default;
};

struct Roi {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t width = 0;
  std::size_t height = 0;
  bool operator==(const Roi&) const = default;
};

FloatImage crop(const FloatImage& image, const Roi& roi);

// Separable triangle-filter resize with half-pixel centres. Upsampling is
// ordinary bilinear interpolation; when downsampling the filter support is
// widened by the scale factor so every source pixel contributes.
FloatImage resize_bilinear(const FloatImage& image, std::size_t width, std::size_t height);

FloatImage hconcat(std::span<const FloatImage> images);
FloatImage vconcat(std::span<const FloatImage> images);

// v / 255.
FloatImage to_float(const GrayImage& image);
// Clamp to [0, 1], scale by 255 and round half away from zero.
GrayImage quantize(const FloatImage& image);

// ---------------------------------------------------------------------------
// Binary PGM (P5), maxval <= 255.

GrayImage decode_pgm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pgm(const GrayImage& image);
GrayImage read_pgm(const std::string& path);
void write_pgm(const std::string& path, const GrayImage& image);

}  // namespace zachvit
