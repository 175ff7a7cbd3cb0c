#include <algorithm>
#include <fstream>
#include <set>

#include "zachvit/errors.h"
#include "zachvit/ssda.h"

namespace zachvit {

namespace fs = std::filesystem;
using nlohmann::json;

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw InputError("unknown split '" + s + "' (expected train, val or test)");
}

Roi default_roi(std::size_t frame_width, std::size_t frame_height) {
  Roi r;
  r.width = std::max<std::size_t>(1, frame_width * 8 / 10);
  r.height = std::max<std::size_t>(1, frame_height * 6 / 10);
  r.x = (frame_width - r.width) / 2;
  r.y = 0;
  return r;
}

namespace {

json read_json_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw InputError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

json roi_json(const Roi& r) { return json::array({r.x, r.y, r.width, r.height}); }

Roi roi_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw InputError("roi must be [x, y, w, h]");
  return {j[0].get<std::size_t>(), j[1].get<std::size_t>(), j[2].get<std::size_t>(), j[3].get<std::size_t>()};
}

json order_json(const ViewOrder& o) { return json::array({o[0], o[1], o[2], o[3]}); }

}  // namespace

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw InputError("cannot write " + tmp.string());
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw InputError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

json DatasetManifest::to_json() const {
  json patients_json = json::array();
  for (const auto& p : patients) {
    json views = json::array();
    for (const auto& v : p.views) views.push_back({{"dir", v.dir}, {"view_index", v.view_index}, {"roi", roi_json(v.roi)}});
    patients_json.push_back(
        {{"patient_id", p.patient_id}, {"label", p.label}, {"split", split_name(p.split)}, {"views", views}});
  }
  json j = {{"format", "zachvit-dataset"}, {"version", 1}, {"patients", patients_json}};
  if (!extra.empty()) j["extra"] = extra;
  return j;
}

DatasetManifest DatasetManifest::from_json(const json& j) {
  DatasetManifest m;
  try {
    for (const auto& pj : j.at("patients")) {
      PatientEntry p;
      p.patient_id = pj.at("patient_id").get<std::string>();
      p.label = pj.at("label").get<int>();
      p.split = parse_split(pj.at("split").get<std::string>());
      const auto& views = pj.at("views");
      if (!views.is_array() || views.size() != 4) throw InputError("patient " + p.patient_id + " must have 4 views");
      for (std::size_t i = 0; i < 4; ++i) {
        p.views[i].dir = views[i].at("dir").get<std::string>();
        p.views[i].view_index = views[i].at("view_index").get<int>();
        p.views[i].roi = roi_from_json(views[i].at("roi"));
      }
      m.patients.push_back(std::move(p));
    }
    if (j.contains("extra")) m.extra = j.at("extra");
  } catch (const json::exception& e) {
    throw InputError(std::string("dataset manifest: ") + e.what());
  }
  m.validate();
  return m;
}

void DatasetManifest::validate() const {
  std::set<std::string> ids;
  for (const auto& p : patients) {
    if (p.patient_id.empty() || p.patient_id.find_first_of("/\\") != std::string::npos) {
      throw InputError("dataset manifest: invalid patient id '" + p.patient_id + "'");
    }
    if (!ids.insert(p.patient_id).second) throw InputError("dataset manifest: duplicate patient " + p.patient_id);
    if (p.label != 0 && p.label != 1) throw InputError("dataset manifest: patient " + p.patient_id + " label not binary");
    for (std::size_t i = 0; i < 4; ++i) {
      if (p.views[i].view_index != static_cast<int>(i) + 1) {
        throw InputError("dataset manifest: patient " + p.patient_id + " views must be listed 1..4");
      }
    }
  }
}

DatasetManifest DatasetManifest::load(const fs::path& path) { return from_json(read_json_file(path)); }

void DatasetManifest::save(const fs::path& path) const { write_text_atomic(path, to_json().dump(2) + "\n"); }

ExamRecord load_exam(const PatientEntry& patient, const fs::path& base_dir) {
  ExamRecord exam;
  exam.patient_id = patient.patient_id;
  exam.label = patient.label;
  for (std::size_t i = 0; i < 4; ++i) {
    const fs::path dir = base_dir / patient.views[i].dir;
    if (!fs::is_directory(dir)) throw InputError("missing view directory " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw InputError("no .pgm frames in " + dir.string());
    exam.views[i].view_index = patient.views[i].view_index;
    for (const auto& f : files) exam.views[i].frames.push_back(read_pgm(f.string()));
  }
  exam.validate();
  return exam;
}

json AugmentedManifest::to_json() const {
  json images_json = json::array();
  for (const auto& e : images) {
    images_json.push_back({{"file", e.file},
                           {"source_patient", e.source_patient},
                           {"label", e.label},
                           {"split", split_name(e.split)},
                           {"permutation", order_json(e.permutation)},
                           {"seed", e.seed ? json(*e.seed) : json(nullptr)}});
  }
  return {{"format", "zachvit-stride-images"},
          {"version", 1},
          {"geometry", zachvit::to_json(geometry)},
          {"regime", regime},
          {"threshold", threshold},
          {"images", images_json}};
}

AugmentedManifest AugmentedManifest::from_json(const json& j) {
  AugmentedManifest m;
  try {
    m.geometry = stride_geometry_from_json(j.at("geometry"));
    m.regime = j.at("regime").get<std::string>();
    m.threshold = j.value("threshold", kDefaultThreshold);
    for (const auto& ej : j.at("images")) {
      AugmentedEntry e;
      e.file = ej.at("file").get<std::string>();
      e.source_patient = ej.at("source_patient").get<std::string>();
      e.label = ej.at("label").get<int>();
      e.split = parse_split(ej.at("split").get<std::string>());
      const auto& perm = ej.at("permutation");
      for (std::size_t i = 0; i < 4; ++i) e.permutation[i] = perm.at(i).get<int>();
      if (!ej.at("seed").is_null()) e.seed = ej.at("seed").get<std::uint64_t>();
      if (e.label != 0 && e.label != 1) throw InputError("augmented manifest: label not binary for " + e.file);
      m.images.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("augmented manifest: ") + e.what());
  }
  return m;
}

AugmentedManifest AugmentedManifest::load(const fs::path& path) { return from_json(read_json_file(path)); }

void AugmentedManifest::save(const fs::path& path) const { write_text_atomic(path, to_json().dump(2) + "\n"); }

}  // namespace zachvit
