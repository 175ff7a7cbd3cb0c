#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "zachvit/image.h"

namespace zachvit {

// Seeds accepted for frame shuffling.
inline constexpr std::array<std::uint64_t, 10> kPrimeSeeds = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
bool is_prime_seed(std::uint64_t seed);

// Pixel values strictly below this (on the 0-255 scale) are zeroed.
inline constexpr int kDefaultThreshold = 93;

struct VideoClip {
  std::vector<GrayImage> frames;
  double fps = 30.0;
  int view_index = 1;

  void validate() const;
};

struct ExamRecord {
  std::string patient_id;
  std::array<VideoClip, 4> views;
  int label = 0;

  void validate() const;
};

using ViewOrder = std::array<int, 4>;

// All 24 orderings of {1,2,3,4}, lexicographic.
std::vector<ViewOrder> view_permutations();
void validate_view_order(const ViewOrder& order);
std::string order_string(const ViewOrder& order);

struct StrideProvenance {
  std::string patient_id;
  std::string regime;
  ViewOrder permutation{1, 2, 3, 4};
  std::optional<std::uint64_t> seed;
  bool operator==(const StrideProvenance&) const = default;
};

struct StrideImage {
  FloatImage pixels;
  StrideProvenance provenance;
};

enum class RegimeMode { vi, svi, vis, ssda };

struct RegimeSpec {
  RegimeMode mode = RegimeMode::vis;
  std::vector<std::uint64_t> seeds;

  // "vi", "svi:<seed>", "vis", "ssda", "ssda0", "ssda:2,3,5", "ssda:all".
  static RegimeSpec parse(const std::string& text);
  std::string tag() const;
  void validate() const;
  // Images produced per exam.
  std::size_t expansion_factor() const;
};

// Stride-image geometry. Each view occupies a horizontal band of
// `band_height` rows; in aligned mode the band is rounded up to a multiple of
// the patch size so that reordering views permutes whole patches.
struct StrideGeometry {
  std::size_t width = 112;
  std::size_t band_height = 28;
  std::size_t patch_size = 16;
  bool aligned = false;

  static StrideGeometry make(std::size_t width, std::size_t patch_size, bool aligned);
  std::size_t height() const { return 4 * band_height; }
  void validate() const;
  bool operator==(const StrideGeometry&) const = default;
};

nlohmann::json to_json(const StrideGeometry& g);
StrideGeometry stride_geometry_from_json(const nlohmann::json& j);

struct PreprocessOptions {
  int threshold = kDefaultThreshold;
  // Target size of a preprocessed frame.
  std::size_t frame_width = 56;
  std::size_t frame_height = 28;

  static PreprocessOptions for_geometry(const StrideGeometry& g);
};

// Steps 1-2: scale to [0, 1] and zero pixels whose 0-255 value < threshold.
FloatImage threshold_frame(const GrayImage& raw, int threshold = kDefaultThreshold);
// The same zeroing applied to an already-normalized image.
FloatImage threshold_normalized(const FloatImage& image, int threshold = kDefaultThreshold);

// Full per-frame pipeline: threshold, crop, keep upper half, resize.
FloatImage preprocess_frame(const GrayImage& raw, const Roi& roi, const PreprocessOptions& options = {});

using FrameStack = std::vector<FloatImage>;

// An exam whose frames have already been preprocessed.
struct PreparedExam {
  std::string patient_id;
  int label = 0;
  std::array<FrameStack, 4> views;
};

PreparedExam prepare_exam(const ExamRecord& exam, const std::array<Roi, 4>& rois, const PreprocessOptions& options);

// Frames left-to-right in the given order, then resized.
FloatImage video_to_vi(std::span<const FloatImage> frames, std::size_t width, std::size_t height);
// Frame order after a seeded Fisher-Yates shuffle.
FrameStack shuffle_frames(std::span<const FloatImage> frames, std::uint64_t seed);
FloatImage video_to_svi(std::span<const FloatImage> frames, std::uint64_t seed, std::size_t width,
                        std::size_t height);

// One VI band per view, stacked top-to-bottom in `order`.
FloatImage exam_to_vis(const std::array<FrameStack, 4>& views, const ViewOrder& order, const StrideGeometry& geometry);

// Canonical single image for evaluation splits: order [1,2,3,4], no shuffle.
StrideImage canonical_vis(const PreparedExam& exam, const StrideGeometry& geometry);

// VIS/SSDA expansion: 24 orders of the unshuffled exam, then 24 more per seed.
// VI/SVI regimes yield one image per view.
std::vector<StrideImage> ssda_expand(const PreparedExam& exam, const RegimeSpec& regime,
                                     const StrideGeometry& geometry);

// ---------------------------------------------------------------------------
// Manifests.

enum class Split { train, val, test };
std::string split_name(Split s);
Split parse_split(const std::string& s);

struct ViewEntry {
  std::string dir;
  int view_index = 1;
  Roi roi;
};

struct PatientEntry {
  std::string patient_id;
  int label = 0;
  Split split = Split::train;
  std::array<ViewEntry, 4> views;
};

struct DatasetManifest {
  std::vector<PatientEntry> patients;
  nlohmann::json extra = nlohmann::json::object();

  static DatasetManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j);
  void validate() const;
};

// Default roi: centred, 80% of the width, upper 60% of the height.
Roi default_roi(std::size_t frame_width, std::size_t frame_height);

// Reads every .pgm in the view directories, sorted by file name.
ExamRecord load_exam(const PatientEntry& patient, const std::filesystem::path& base_dir);

struct AugmentedEntry {
  std::string file;
  std::string source_patient;
  int label = 0;
  Split split = Split::train;
  ViewOrder permutation{1, 2, 3, 4};
  std::optional<std::uint64_t> seed;
};

struct AugmentedManifest {
  StrideGeometry geometry;
  std::string regime;
  int threshold = kDefaultThreshold;
  std::vector<AugmentedEntry> images;

  static AugmentedManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  nlohmann::json to_json() const;
  static AugmentedManifest from_json(const nlohmann::json& j);
};

std::string stride_file_name(const StrideProvenance& p);

struct ExpandOptions {
  StrideGeometry geometry;
  RegimeSpec regime;
  PreprocessOptions preprocess;
  unsigned threads = 1;
};

// Materializes the stride images for every patient in the manifest and writes
// `<output_dir>/manifest.json`. Training patients get the full regime; val and
// test patients get the canonical image only. All inputs are checked up front;
// on failure the output directory is removed.
AugmentedManifest expand_dataset(const std::filesystem::path& manifest_path, const ExpandOptions& options,
                                 const std::filesystem::path& output_dir);

// Atomic write through a sibling temp file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace zachvit
