#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "zachvit/ssda.h"

namespace zachvit {

// Label-0 exams come in three flavours; label-1 exams are always `cpe`.
enum class SubType { cpe, ncip, ild, healthy };
std::string subtype_name(SubType t);
SubType parse_subtype(const std::string& s);

struct SynthSpec {
  std::size_t n_patients = 95;
  double prevalence = 0.295;
  std::size_t frames_per_video = 16;
  std::size_t frame_width = 112;
  std::size_t frame_height = 112;
  double noise_level = 0.05;
  // Weights over {ncip, ild, healthy}.
  std::array<double, 3> class0_mix{0.4, 0.3, 0.3};
  std::uint64_t master_seed = 1;

  void validate() const;
};

nlohmann::json to_json(const SynthSpec& s);
SynthSpec synth_spec_from_json(const nlohmann::json& j, SynthSpec base = {});

ExamRecord generate_exam(int label, SubType sub_type, std::uint64_t seed, const SynthSpec& spec = {});

// Integer apportionment of `total` proportional to `weights` (Hamilton's
// method); ties on the remainder go to the earlier entry.
std::vector<std::size_t> largest_remainder(std::size_t total, std::span<const std::uint64_t> weights);

struct SplitPlan {
  std::array<std::size_t, 3> sizes{};      // train, val, test
  std::array<std::size_t, 3> positives{};  // label-1 patients per split
};

// Splits in proportion 61:18:16 with round(prevalence * n) positives spread
// across splits by the same rule. Every split needs a positive and a negative.
SplitPlan plan_splits(std::size_t n_patients, double prevalence);

struct PatientPlan {
  std::string patient_id;
  int label = 0;
  SubType sub_type = SubType::cpe;
  Split split = Split::train;
  std::uint64_t seed = 0;
};

std::vector<PatientPlan> plan_patients(const SynthSpec& spec);

// Writes `<out>/<pid>/view<k>/NNNN.pgm` frames and `<out>/dataset.json`.
DatasetManifest generate_dataset(const SynthSpec& spec, const std::filesystem::path& out_dir, unsigned threads = 1);

// Mean over frames of the variance of column-mean brightness. Vertical
// structure scores high, horizontal structure low.
double column_variance_score(const ExamRecord& exam);

}  // namespace zachvit
