#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "zachvit/errors.h"
#include "zachvit/synth.h"
#include "zachvit/verify.h"

using namespace zachvit;
namespace fs = std::filesystem;

namespace {

// Independent apportionment: floor of the real quota, then hand out the rest
// by descending fractional part.
std::vector<std::size_t> apportion_oracle(std::size_t total, const std::vector<double>& weights) {
  double sum = 0.0;
  for (double w : weights) sum += w;
  std::vector<std::size_t> out;
  std::vector<std::pair<double, std::size_t>> fractions;
  std::size_t used = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double quota = total * weights[i] / sum;
    out.push_back(static_cast<std::size_t>(std::floor(quota)));
    used += out.back();
    // Rounded so exact ties compare equal and fall back to index order.
    fractions.emplace_back(-std::round((quota - std::floor(quota)) * 1e9), i);
  }
  std::sort(fractions.begin(), fractions.end());
  for (std::size_t k = 0; used < total; ++k, ++used) ++out[fractions[k].second];
  return out;
}

SynthSpec small_spec() {
  SynthSpec s;
  s.n_patients = 12;
  s.prevalence = 0.4;
  s.frames_per_video = 2;
  s.frame_width = 32;
  s.frame_height = 32;
  s.master_seed = 7;
  return s;
}

std::vector<std::uint8_t> file_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(SynthExam, SameSeedRegeneratesBitIdentically) {
  for (auto [label, type] : {std::pair{1, SubType::cpe}, {0, SubType::ncip}, {0, SubType::ild}, {0, SubType::healthy}}) {
    const ExamRecord a = generate_exam(label, type, 42);
    const ExamRecord b = generate_exam(label, type, 42);
    for (std::size_t v = 0; v < 4; ++v) EXPECT_EQ(a.views[v].frames, b.views[v].frames);
    EXPECT_NO_THROW(a.validate());
    EXPECT_EQ(a.views[0].frames.size(), 16u);
    EXPECT_EQ(a.views[0].frames[0].width, 112u);
  }
}

TEST(SynthExam, DifferentSeedsDiffer) {
  const ExamRecord a = generate_exam(1, SubType::cpe, 1);
  const ExamRecord b = generate_exam(1, SubType::cpe, 2);
  EXPECT_NE(a.views[0].frames[0], b.views[0].frames[0]);
}

TEST(SynthExam, ViewsAreJitteredIndependently) {
  const ExamRecord a = generate_exam(0, SubType::healthy, 3);
  EXPECT_NE(a.views[0].frames[0], a.views[1].frames[0]);
  EXPECT_NE(a.views[0].frames[0], a.views[0].frames[1]);
}

TEST(SynthExam, NoiselessStreaksAreBrighterThanBackground) {
  SynthSpec spec;
  spec.noise_level = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ExamRecord e = generate_exam(1, SubType::cpe, seed, spec);
    for (const auto& f : e.views[0].frames) {
      // Deep rows hold only streaks over a flat background.
      const std::size_t y = f.height - 4;
      std::uint8_t lo = 255, hi = 0;
      for (std::size_t x = 0; x < f.width; ++x) {
        lo = std::min(lo, f.at(x, y));
        hi = std::max(hi, f.at(x, y));
      }
      EXPECT_GT(hi, lo + 60);
      EXPECT_GE(hi, kDefaultThreshold);
      EXPECT_LT(lo, kDefaultThreshold);
    }
  }
}

TEST(SynthExam, LabelAndSubTypeContract) {
  EXPECT_THROW(generate_exam(2, SubType::cpe, 1), ConfigError);
  EXPECT_THROW(generate_exam(0, SubType::cpe, 1), ConfigError);
  EXPECT_EQ(generate_exam(1, SubType::ild, 1).label, 1);
}

TEST(SynthExam, SmallestFramesRenderForEverySubType) {
  SynthSpec spec;
  spec.frame_width = spec.frame_height = 16;
  spec.frames_per_video = 3;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    EXPECT_EQ(generate_exam(1, SubType::cpe, seed, spec).views[0].frames.size(), 3u);
    for (SubType t : {SubType::ncip, SubType::ild, SubType::healthy})
      EXPECT_EQ(generate_exam(0, t, seed, spec).views[3].frames[2].width, 16u);
  }
}

TEST(SynthSignal, ColumnVarianceSeparatesCpeFromHealthy) {
  SynthSpec spec;
  spec.frames_per_video = 4;
  for (double noise : {0.0, 0.05, 0.1}) {
    spec.noise_level = noise;
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::uint64_t s = 0; s < 20; ++s) {
      scores.push_back(column_variance_score(generate_exam(1, SubType::cpe, 100 + s, spec)));
      labels.push_back(1);
      scores.push_back(column_variance_score(generate_exam(0, SubType::healthy, 200 + s, spec)));
      labels.push_back(0);
    }
    EXPECT_GE(verify::pairwise_auc(scores, labels), 0.9) << "noise " << noise;
  }
}

TEST(SynthSplits, LargestRemainderMatchesOracle) {
  const std::vector<std::uint64_t> w = {61, 18, 16};
  for (std::size_t n = 0; n <= 300; ++n) {
    const auto got = largest_remainder(n, w);
    EXPECT_EQ(got, apportion_oracle(n, {61, 18, 16})) << "n=" << n;
  }
  EXPECT_EQ(largest_remainder(95, w), (std::vector<std::size_t>{61, 18, 16}));
  EXPECT_EQ(largest_remainder(20, w), (std::vector<std::size_t>{13, 4, 3}));
}

TEST(SynthSplits, DefaultCohortMirrorsReferenceSplit) {
  const SplitPlan p = plan_splits(95, 0.295);
  EXPECT_EQ(p.sizes, (std::array<std::size_t, 3>{61, 18, 16}));
  EXPECT_EQ(p.positives[0] + p.positives[1] + p.positives[2], 28u);
  EXPECT_EQ(p.positives, (std::array<std::size_t, 3>{18, 5, 5}));
}

TEST(SynthSplits, SmallCohortEachSplitHasBothClasses) {
  const SplitPlan p = plan_splits(20, 0.3);
  EXPECT_EQ(p.sizes, (std::array<std::size_t, 3>{13, 4, 3}));
  for (std::size_t s = 0; s < 3; ++s) {
    EXPECT_GE(p.positives[s], 1u);
    EXPECT_LT(p.positives[s], p.sizes[s]);
  }
}

TEST(SynthSplits, TooFewPatientsIsConfigError) {
  EXPECT_THROW(plan_splits(3, 0.3), ConfigError);
  EXPECT_THROW(plan_splits(0, 0.3), ConfigError);
  EXPECT_THROW(plan_splits(95, 0.0), ConfigError);
  EXPECT_THROW(plan_splits(95, 1.0), ConfigError);
}

TEST(SynthSpec, ValidatesMixAndRanges) {
  SynthSpec s;
  s.class0_mix = {0.5, 0.5, 0.5};
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.noise_level = -0.1;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  EXPECT_EQ(synth_spec_from_json(to_json(s)).class0_mix, s.class0_mix);
  EXPECT_EQ(synth_spec_from_json({{"n_patients", 40}}).n_patients, 40u);
}

TEST(SynthPatients, DisjointIdsAndExpectedCounts) {
  SynthSpec spec;
  const auto patients = plan_patients(spec);
  ASSERT_EQ(patients.size(), 95u);
  std::set<std::string> ids;
  std::array<std::size_t, 3> per_split{};
  std::size_t positives = 0, ncip = 0, ild = 0, healthy = 0;
  for (const auto& p : patients) {
    EXPECT_TRUE(ids.insert(p.patient_id).second);
    ++per_split[static_cast<std::size_t>(p.split)];
    positives += static_cast<std::size_t>(p.label);
    ncip += p.sub_type == SubType::ncip;
    ild += p.sub_type == SubType::ild;
    healthy += p.sub_type == SubType::healthy;
  }
  EXPECT_EQ(per_split, (std::array<std::size_t, 3>{61, 18, 16}));
  EXPECT_EQ(positives, 28u);
  EXPECT_EQ(ncip + ild + healthy, 67u);
  EXPECT_GT(ncip, 0u);
  EXPECT_GT(ild, 0u);
  EXPECT_GT(healthy, 0u);
}

TEST(SynthDataset, WritesLoadableDatasetDeterministically) {
  const fs::path root = fs::temp_directory_path() / "zachvit_synth_ds";
  fs::remove_all(root);
  const auto spec = small_spec();
  const DatasetManifest a = generate_dataset(spec, root / "a", 1);
  generate_dataset(spec, root / "b", 3);
  ASSERT_EQ(a.patients.size(), 12u);
  for (const auto& p : a.patients) {
    for (const auto& v : p.views) {
      for (const char* f : {"0000.pgm", "0001.pgm"}) {
        EXPECT_EQ(file_bytes(root / "a" / v.dir / f), file_bytes(root / "b" / v.dir / f));
      }
    }
  }
  EXPECT_EQ(file_bytes(root / "a" / "dataset.json"), file_bytes(root / "b" / "dataset.json"));
  const DatasetManifest reloaded = DatasetManifest::load(root / "a" / "dataset.json");
  EXPECT_EQ(reloaded.patients.size(), 12u);
  EXPECT_EQ(reloaded.extra.at("spec").at("master_seed"), 7);

  ExpandOptions opts;
  opts.geometry = StrideGeometry::make(32, 8, false);
  opts.regime = RegimeSpec::parse("ssda0");
  opts.preprocess = PreprocessOptions::for_geometry(opts.geometry);
  const auto aug = expand_dataset(root / "a" / "dataset.json", opts, root / "aug");
  const SplitPlan plan = plan_splits(12, 0.4);
  EXPECT_EQ(aug.images.size(), plan.sizes[0] * 24 + plan.sizes[1] + plan.sizes[2]);
  std::size_t positives = 0;
  for (const auto& e : aug.images) positives += e.split == Split::train && e.label == 1;
  EXPECT_EQ(positives, plan.positives[0] * 24);
  fs::remove_all(root);
}
