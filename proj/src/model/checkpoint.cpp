#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "zachvit/errors.h"
#include "zachvit/model.h"

namespace zachvit {

namespace {

constexpr char kMagic[8] = {'Z', 'V', 'C', 'K', 'P', 'T', '0', '1'};

template <class T>
void put_le(std::ostream& os, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw InputError("checkpoint: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

nlohmann::json read_header(std::istream& is, const std::string& path) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw InputError("checkpoint: " + path + " is not a checkpoint file");
  }
  const auto version = get_le<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw InputError("checkpoint: unsupported format version " + std::to_string(version));
  }
  const auto len = get_le<std::uint64_t>(is);
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len))) throw InputError("checkpoint: truncated manifest");
  return nlohmann::json::parse(text);
}

}  // namespace

void save_checkpoint(const VitModel& model, const std::string& path, const nlohmann::json& extra) {
  nlohmann::json manifest;
  manifest["format"] = "zachvit-checkpoint";
  manifest["version"] = kCheckpointVersion;
  manifest["model"] = model.kind();
  manifest["config"] = model.config_json();
  manifest["dtype"] = "float64-le";
  manifest["extra"] = extra;
  std::uint64_t offset = 0;
  auto& entries = manifest["params"] = nlohmann::json::array();
  for (const Parameter* p : model.params().all()) {
    const std::uint64_t bytes = p->size() * sizeof(double);
    entries.push_back({{"name", p->name()}, {"shape", p->shape()}, {"offset", offset}, {"bytes", bytes}});
    offset += bytes;
  }
  manifest["data_bytes"] = offset;
  const std::string text = manifest.dump();

  // Write to a sibling temp file, then rename, so readers never see a partial file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw InputError("checkpoint: cannot write " + tmp);
    os.write(kMagic, 8);
    put_le<std::uint32_t>(os, kCheckpointVersion);
    put_le<std::uint64_t>(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const Parameter* p : model.params().all()) {
      for (double v : p->value().values()) put_le<double>(os, v);
    }
    if (!os) throw InputError("checkpoint: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

nlohmann::json read_checkpoint_manifest(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("checkpoint: cannot open " + path);
  return read_header(is, path);
}

std::unique_ptr<VitModel> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("checkpoint: cannot open " + path);
  const nlohmann::json manifest = read_header(is, path);
  if (manifest.value("dtype", "") != "float64-le") throw InputError("checkpoint: unsupported dtype");
  auto model = make_model(manifest.at("model").get<std::string>(), manifest.at("config"));

  const auto& entries = manifest.at("params");
  if (entries.size() != model->params().size()) {
    throw InputError("checkpoint: " + std::to_string(entries.size()) + " parameters stored, model has " +
                     std::to_string(model->params().size()));
  }
  const auto data_start = is.tellg();
  for (const auto& e : entries) {
    const auto name = e.at("name").get<std::string>();
    Parameter* p = model->params().find(name);
    if (!p) throw InputError("checkpoint: unknown parameter " + name);
    if (e.at("shape").get<Shape>() != p->shape()) {
      throw InputError("checkpoint: shape mismatch for " + name);
    }
    is.seekg(data_start + static_cast<std::streamoff>(e.at("offset").get<std::uint64_t>()));
    std::vector<double> values(p->size());
    for (auto& v : values) v = get_le<double>(is);
    p->assign(std::move(values));
  }
  return model;
}

}  // namespace zachvit
