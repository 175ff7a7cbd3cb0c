#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "zachvit/errors.h"
#include "zachvit/rng.h"
#include "zachvit/synth.h"

namespace zachvit {

namespace fs = std::filesystem;

std::vector<std::size_t> largest_remainder(std::size_t total, std::span<const std::uint64_t> weights) {
  const std::uint64_t sum = std::accumulate(weights.begin(), weights.end(), std::uint64_t{0});
  if (weights.empty() || sum == 0) throw ConfigError("largest_remainder: weights sum to zero");
  std::vector<std::size_t> out(weights.size());
  std::vector<std::uint64_t> remainder(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const std::uint64_t scaled = static_cast<std::uint64_t>(total) * weights[i];
    out[i] = static_cast<std::size_t>(scaled / sum);
    remainder[i] = scaled % sum;
    assigned += out[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++out[order[k]];
  return out;
}

SplitPlan plan_splits(std::size_t n_patients, double prevalence) {
  if (!(prevalence > 0.0 && prevalence < 1.0)) throw ConfigError("prevalence must lie in (0, 1)");
  static constexpr std::array<std::uint64_t, 3> kProportions = {61, 18, 16};
  SplitPlan plan;
  const auto sizes = largest_remainder(n_patients, kProportions);
  std::copy(sizes.begin(), sizes.end(), plan.sizes.begin());
  const auto total_pos = static_cast<std::size_t>(std::lround(prevalence * static_cast<double>(n_patients)));
  const std::array<std::uint64_t, 3> size_weights = {sizes[0], sizes[1], sizes[2]};
  if (n_patients > 0) {
    const auto pos = largest_remainder(total_pos, size_weights);
    std::copy(pos.begin(), pos.end(), plan.positives.begin());
  }
  static constexpr std::array<const char*, 3> kNames = {"train", "val", "test"};
  for (std::size_t s = 0; s < 3; ++s) {
    if (plan.positives[s] == 0 || plan.positives[s] >= plan.sizes[s]) {
      throw ConfigError("n_patients=" + std::to_string(n_patients) + " with prevalence " + std::to_string(prevalence) +
                        " leaves the " + kNames[s] + " split (" + std::to_string(plan.sizes[s]) + " patients, " +
                        std::to_string(plan.positives[s]) + " positive) without both classes");
    }
  }
  return plan;
}

std::vector<PatientPlan> plan_patients(const SynthSpec& spec) {
  spec.validate();
  const SplitPlan plan = plan_splits(spec.n_patients, spec.prevalence);
  Xoshiro256pp assign_rng(derive_seed(spec.master_seed, "assign"));
  std::vector<PatientPlan> out;
  std::size_t index = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    std::vector<int> labels(plan.sizes[s], 0);
    std::fill_n(labels.begin(), plan.positives[s], 1);
    fisher_yates(std::span(labels), assign_rng);
    for (int label : labels) {
      PatientPlan p;
      char id[16];
      std::snprintf(id, sizeof id, "P%04zu", index + 1);
      p.patient_id = id;
      p.label = label;
      p.split = static_cast<Split>(s);
      p.seed = derive_seed(spec.master_seed, static_cast<std::uint64_t>(index));
      if (label == 1) {
        p.sub_type = SubType::cpe;
      } else {
        Xoshiro256pp rng(derive_seed(p.seed, "subtype"));
        const double u = rng.uniform();
        const auto& mix = spec.class0_mix;
        p.sub_type = u < mix[0] ? SubType::ncip : u < mix[0] + mix[1] ? SubType::ild : SubType::healthy;
      }
      out.push_back(p);
      ++index;
    }
  }
  return out;
}

DatasetManifest generate_dataset(const SynthSpec& spec, const fs::path& out_dir, unsigned threads) {
  const auto patients = plan_patients(spec);
  fs::create_directories(out_dir);
  const Roi roi = default_roi(spec.frame_width, spec.frame_height);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < patients.size(); i = next++) {
      try {
        const auto& p = patients[i];
        const ExamRecord exam = generate_exam(p.label, p.sub_type, p.seed, spec);
        for (std::size_t v = 0; v < 4; ++v) {
          const fs::path dir = out_dir / p.patient_id / ("view" + std::to_string(v + 1));
          fs::create_directories(dir);
          for (std::size_t f = 0; f < exam.views[v].frames.size(); ++f) {
            char name[16];
            std::snprintf(name, sizeof name, "%04zu.pgm", f);
            write_pgm((dir / name).string(), exam.views[v].frames[f]);
          }
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = patients.size();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  DatasetManifest manifest;
  nlohmann::json subtypes = nlohmann::json::object();
  for (const auto& p : patients) {
    PatientEntry e;
    e.patient_id = p.patient_id;
    e.label = p.label;
    e.split = p.split;
    for (std::size_t v = 0; v < 4; ++v) {
      e.views[v] = {p.patient_id + "/view" + std::to_string(v + 1), static_cast<int>(v) + 1, roi};
    }
    manifest.patients.push_back(e);
    subtypes[p.patient_id] = subtype_name(p.sub_type);
  }
  manifest.extra = {{"generator", "zachvit-synth"}, {"spec", to_json(spec)}, {"sub_types", subtypes}};
  manifest.save(out_dir / "dataset.json");
  return manifest;
}

}  // namespace zachvit
