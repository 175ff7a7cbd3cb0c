#include <cctype>
#include <fstream>
#include <iterator>

#include "zachvit/errors.h"
#include "zachvit/image.h"

namespace zachvit {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t number() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) throw InputError("pgm: malformed header");
    std::size_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_++] - '0');
      if (value > (1u << 30)) throw InputError("pgm: header value too large");
    }
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw InputError("pgm: malformed header");
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 2;
};

}  // namespace

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw InputError("pgm: not a binary P5 file");
  HeaderReader header(bytes);
  const std::size_t width = header.number();
  const std::size_t height = header.number();
  const std::size_t maxval = header.number();
  if (width == 0 || height == 0) throw InputError("pgm: zero dimension");
  if (maxval == 0 || maxval > 255) throw InputError("pgm: only 8-bit maxval is supported");
  const std::size_t start = header.raster_start();
  if (bytes.size() < start + width * height) throw InputError("pgm: truncated raster");
  GrayImage image(width, height);
  for (std::size_t i = 0; i < width * height; ++i) {
    const std::size_t v = bytes[start + i];
    image.pixels[i] = static_cast<std::uint8_t>(maxval == 255 ? v : (v * 255 + maxval / 2) / maxval);
  }
  return image;
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& image) {
  const std::string header =
      "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

GrayImage read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("pgm: cannot open " + path);
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  try {
    return decode_pgm(bytes);
  } catch (const InputError& e) {
    throw InputError(std::string(e.what()) + " (" + path + ")");
  }
}

void write_pgm(const std::string& path, const GrayImage& image) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("pgm: cannot write " + path);
  const auto bytes = encode_pgm(image);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw InputError("pgm: write failed for " + path);
}

}  // namespace zachvit
