#include <algorithm>
#include <cmath>

#include "zachvit/errors.h"
#include "zachvit/ssda.h"

namespace zachvit {

void VideoClip::validate() const {
  if (frames.empty()) throw InputError("video clip (view " + std::to_string(view_index) + ") has no frames");
  if (view_index < 1 || view_index > 4) throw InputError("view index must be 1..4, got " + std::to_string(view_index));
  const auto& first = frames.front();
  if (first.width == 0 || first.height == 0) throw InputError("video clip has an empty frame");
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].width != first.width || frames[i].height != first.height) {
      throw InputError("video clip (view " + std::to_string(view_index) + ") frame " + std::to_string(i) +
                       " is " + std::to_string(frames[i].width) + "x" + std::to_string(frames[i].height) +
                       ", expected " + std::to_string(first.width) + "x" + std::to_string(first.height));
    }
  }
}

void ExamRecord::validate() const {
  if (label != 0 && label != 1) throw InputError("exam " + patient_id + ": label must be 0 or 1");
  for (std::size_t i = 0; i < 4; ++i) {
    if (views[i].view_index != static_cast<int>(i) + 1) {
      throw InputError("exam " + patient_id + ": views must be ordered 1..4");
    }
    views[i].validate();
  }
}

StrideGeometry StrideGeometry::make(std::size_t width, std::size_t patch_size, bool aligned) {
  StrideGeometry g;
  g.width = width;
  g.patch_size = patch_size;
  g.aligned = aligned;
  const std::size_t quarter = width / 4;
  g.band_height = aligned ? (quarter + patch_size - 1) / patch_size * patch_size : quarter;
  g.validate();
  return g;
}

void StrideGeometry::validate() const {
  if (width == 0 || band_height == 0 || patch_size == 0) throw ConfigError("stride geometry has a zero extent");
  if (width % patch_size != 0 || height() % patch_size != 0) {
    throw ConfigError("stride geometry " + std::to_string(width) + "x" + std::to_string(height()) +
                      " is not divisible by patch size " + std::to_string(patch_size));
  }
  if (aligned && band_height % patch_size != 0) {
    throw ConfigError("aligned stride geometry needs band height divisible by the patch size");
  }
}

nlohmann::json to_json(const StrideGeometry& g) {
  return {{"width", g.width},
          {"height", g.height()},
          {"band_height", g.band_height},
          {"patch_size", g.patch_size},
          {"aligned", g.aligned}};
}

StrideGeometry stride_geometry_from_json(const nlohmann::json& j) {
  StrideGeometry g;
  g.width = j.at("width").get<std::size_t>();
  g.band_height = j.at("band_height").get<std::size_t>();
  g.patch_size = j.at("patch_size").get<std::size_t>();
  g.aligned = j.at("aligned").get<bool>();
  g.validate();
  return g;
}

PreprocessOptions PreprocessOptions::for_geometry(const StrideGeometry& g) {
  PreprocessOptions o;
  o.frame_width = std::max<std::size_t>(1, g.width / 2);
  o.frame_height = g.band_height;
  return o;
}

FloatImage threshold_frame(const GrayImage& raw, int threshold) {
  FloatImage out(raw.width, raw.height);
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) {
    const int v = raw.pixels[i];
    out.pixels[i] = v < threshold ? 0.0 : v / 255.0;
  }
  return out;
}

FloatImage threshold_normalized(const FloatImage& image, int threshold) {
  FloatImage out = image;
  for (auto& v : out.pixels) {
    if (std::round(v * 255.0) < threshold) v = 0.0;
  }
  return out;
}

FloatImage preprocess_frame(const GrayImage& raw, const Roi& roi, const PreprocessOptions& options) {
  if (roi.width == 0 || roi.height == 0 || roi.x + roi.width > raw.width || roi.y + roi.height > raw.height) {
    throw InputError("roi [" + std::to_string(roi.x) + "," + std::to_string(roi.y) + "," + std::to_string(roi.width) +
                     "," + std::to_string(roi.height) + "] is outside the " + std::to_string(raw.width) + "x" +
                     std::to_string(raw.height) + " frame");
  }
  if (options.frame_width == 0 || options.frame_height == 0) throw ConfigError("preprocess target size is zero");
  const FloatImage thresholded = threshold_frame(raw, options.threshold);
  Roi upper = roi;
  upper.height = std::max<std::size_t>(1, roi.height / 2);
  return resize_bilinear(crop(thresholded, upper), options.frame_width, options.frame_height);
}

PreparedExam prepare_exam(const ExamRecord& exam, const std::array<Roi, 4>& rois, const PreprocessOptions& options) {
  exam.validate();
  PreparedExam out;
  out.patient_id = exam.patient_id;
  out.label = exam.label;
  for (std::size_t v = 0; v < 4; ++v) {
    out.views[v].reserve(exam.views[v].frames.size());
    for (const auto& frame : exam.views[v].frames) out.views[v].push_back(preprocess_frame(frame, rois[v], options));
  }
  return out;
}

}  // namespace zachvit
