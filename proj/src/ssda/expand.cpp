#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "zachvit/errors.h"
#include "zachvit/ssda.h"

namespace zachvit {

namespace fs = std::filesystem;

namespace {

std::array<Roi, 4> rois_of(const PatientEntry& p) {
  return {p.views[0].roi, p.views[1].roi, p.views[2].roi, p.views[3].roi};
}

// Returns a description of every problem found, empty when the exam is usable.
std::vector<std::string> check_patient(const PatientEntry& p, const fs::path& base) {
  std::vector<std::string> problems;
  for (std::size_t i = 0; i < 4; ++i) {
    const fs::path dir = base / p.views[i].dir;
    if (!fs::is_directory(dir)) {
      problems.push_back(p.patient_id + " view " + std::to_string(i + 1) + ": missing directory " + dir.string());
      continue;
    }
    std::size_t frames = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().extension() != ".pgm") continue;
      ++frames;
      try {
        const GrayImage im = read_pgm(entry.path().string());
        const Roi& r = p.views[i].roi;
        if (r.width == 0 || r.height == 0 || r.x + r.width > im.width || r.y + r.height > im.height) {
          problems.push_back(p.patient_id + " view " + std::to_string(i + 1) + ": roi outside frame " +
                             entry.path().string());
          break;
        }
      } catch (const InputError& e) {
        problems.push_back(p.patient_id + " view " + std::to_string(i + 1) + ": " + e.what());
      }
    }
    if (frames == 0) problems.push_back(p.patient_id + " view " + std::to_string(i + 1) + ": no .pgm frames in " + dir.string());
  }
  return problems;
}

std::vector<AugmentedEntry> expand_patient(const PatientEntry& p, const fs::path& base, const ExpandOptions& options,
                                           const fs::path& staging) {
  const ExamRecord exam = load_exam(p, base);
  const PreparedExam prepared = prepare_exam(exam, rois_of(p), options.preprocess);
  std::vector<StrideImage> images;
  if (p.split == Split::train) {
    images = ssda_expand(prepared, options.regime, options.geometry);
  } else {
    images.push_back(canonical_vis(prepared, options.geometry));
  }
  fs::create_directories(staging / p.patient_id);
  std::vector<AugmentedEntry> entries;
  entries.reserve(images.size());
  for (const auto& im : images) {
    const std::string rel = p.patient_id + "/" + stride_file_name(im.provenance);
    write_pgm((staging / rel).string(), quantize(im.pixels));
    entries.push_back({rel, p.patient_id, p.label, p.split, im.provenance.permutation, im.provenance.seed});
  }
  return entries;
}

}  // namespace

AugmentedManifest expand_dataset(const fs::path& manifest_path, const ExpandOptions& options,
                                 const fs::path& output_dir) {
  options.geometry.validate();
  options.regime.validate();
  const DatasetManifest manifest = DatasetManifest::load(manifest_path);
  const fs::path base = manifest_path.parent_path();

  std::vector<std::string> problems;
  for (const auto& p : manifest.patients) {
    auto found = check_patient(p, base);
    problems.insert(problems.end(), found.begin(), found.end());
  }
  if (!problems.empty()) {
    std::string report = std::to_string(problems.size()) + " problem(s) in dataset " + manifest_path.string() + ":";
    for (const auto& line : problems) report += "\n  - " + line;
    throw InputError(report);
  }

  // Everything is written to a staging directory that replaces the output
  // only after every image succeeded.
  const fs::path staging = output_dir.string() + ".partial";
  fs::remove_all(staging);
  fs::create_directories(staging);

  std::vector<std::vector<AugmentedEntry>> per_patient(manifest.patients.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < manifest.patients.size(); i = next++) {
      try {
        per_patient[i] = expand_patient(manifest.patients[i], base, options, staging);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = manifest.patients.size();
      }
    }
  };
  const unsigned threads = std::max(1u, options.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) {
    fs::remove_all(staging);
    std::rethrow_exception(failure);
  }

  AugmentedManifest out;
  out.geometry = options.geometry;
  out.regime = options.regime.tag();
  out.threshold = options.preprocess.threshold;
  for (auto& entries : per_patient) {
    for (auto& e : entries) out.images.push_back(std::move(e));
  }
  out.save(staging / "manifest.json");

  fs::remove_all(output_dir);
  if (output_dir.has_parent_path()) fs::create_directories(output_dir.parent_path());
  fs::rename(staging, output_dir);
  return out;
}

}  // namespace zachvit
