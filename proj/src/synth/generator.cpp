#include <algorithm>
#include <cmath>
#include <numbers>

#include "zachvit/errors.h"
#include "zachvit/rng.h"
#include "zachvit/synth.h"

namespace zachvit {

std::string subtype_name(SubType t) {
  switch (t) {
    case SubType::cpe: return "cpe";
    case SubType::ncip: return "ncip";
    case SubType::ild: return "ild";
    case SubType::healthy: return "healthy";
  }
  return "?";
}

SubType parse_subtype(const std::string& s) {
  for (auto t : {SubType::cpe, SubType::ncip, SubType::ild, SubType::healthy})
    if (subtype_name(t) == s) return t;
  throw InputError("unknown sub-type '" + s + "'");
}

void SynthSpec::validate() const {
  if (!(prevalence > 0.0 && prevalence < 1.0)) throw ConfigError("prevalence must lie in (0, 1)");
  if (frames_per_video == 0) throw ConfigError("frames_per_video must be positive");
  if (frame_width < 16 || frame_height < 16) throw ConfigError("frames must be at least 16x16");
  if (!(noise_level >= 0.0 && noise_level <= 1.0)) throw ConfigError("noise_level must lie in [0, 1]");
  double sum = 0.0;
  for (double w : class0_mix) {
    if (!(w >= 0.0)) throw ConfigError("class0_mix weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("class0_mix weights must sum to 1");
}

nlohmann::json to_json(const SynthSpec& s) {
  return {{"n_patients", s.n_patients},
          {"prevalence", s.prevalence},
          {"frames_per_video", s.frames_per_video},
          {"frame_width", s.frame_width},
          {"frame_height", s.frame_height},
          {"noise_level", s.noise_level},
          {"class0_mix", s.class0_mix},
          {"master_seed", s.master_seed}};
}

SynthSpec synth_spec_from_json(const nlohmann::json& j, SynthSpec s) {
  try {
    s.n_patients = j.value("n_patients", s.n_patients);
    s.prevalence = j.value("prevalence", s.prevalence);
    s.frames_per_video = j.value("frames_per_video", s.frames_per_video);
    s.frame_width = j.value("frame_width", s.frame_width);
    s.frame_height = j.value("frame_height", s.frame_height);
    s.noise_level = j.value("noise_level", s.noise_level);
    s.class0_mix = j.value("class0_mix", s.class0_mix);
    s.master_seed = j.value("master_seed", s.master_seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synth spec: ") + e.what());
  }
  s.validate();
  return s;
}

namespace {

constexpr int kViews = 4;

struct Streak {
  double x = 0;        // centre column
  double sigma = 1;    // horizontal spread
  double intensity = 0;
  double length = 0;   // rows below the pleural line
  double wobble = 0;   // lateral sinusoid amplitude
  double phase = 0;
};

struct Blob {
  double x = 0, y = 0, radius = 1, intensity = 0;
};

// Exam-level description shared by the four views.
struct Scene {
  SubType type = SubType::cpe;
  double pleura_depth = 0;
  double pleura_sigma = 1;
  double pleura_intensity = 0;
  double background = 0;
  std::vector<Streak> streaks;
  std::vector<Blob> blobs;
  std::vector<std::pair<double, double>> gaps;  // pleural-line breaks [x0, x1)
  double a_line_intensity = 0;
  double speckle = 0;
};

Scene make_scene(SubType type, double w, double h, Xoshiro256pp& rng) {
  Scene s;
  s.type = type;
  s.pleura_depth = rng.uniform(0.06, 0.10) * h;
  s.pleura_sigma = rng.uniform(1.0, 1.5);
  s.pleura_intensity = rng.uniform(0.75, 0.9);
  s.background = rng.uniform(0.08, 0.2);
  const double full = h - s.pleura_depth;
  switch (type) {
    case SubType::cpe: {
      const auto n = rng.between(3, 5);
      for (long long i = 0; i < n; ++i) {
        Streak st;
        st.x = w * (0.15 + 0.7 * (static_cast<double>(i) + rng.uniform(0.2, 0.8)) / static_cast<double>(n));
        st.sigma = rng.uniform(2.5, 4.0);
        st.intensity = rng.uniform(0.75, 0.95);
        st.length = full;
        s.streaks.push_back(st);
      }
      break;
    }
    case SubType::ncip: {
      const auto n = rng.between(1, 2);
      for (long long i = 0; i < n; ++i) {
        Streak st;
        st.x = rng.uniform(0.15, 0.85) * w;
        st.sigma = rng.uniform(1.5, 2.5);
        st.intensity = rng.uniform(0.5, 0.7);
        st.length = rng.uniform(0.08, 0.18) * h;
        st.wobble = rng.uniform(1.0, 3.0);
        st.phase = rng.uniform(0.0, 2 * std::numbers::pi);
        s.streaks.push_back(st);
      }
      const auto nb = rng.between(2, 4);
      for (long long i = 0; i < nb; ++i) {
        s.blobs.push_back({rng.uniform(0.15, 0.85) * w, s.pleura_depth + rng.uniform(0.04, 0.2) * h,
                           rng.uniform(3.0, 6.0), rng.uniform(0.5, 0.7)});
      }
      const auto ng = rng.between(1, 3);
      for (long long i = 0; i < ng; ++i) {
        const double x0 = rng.uniform(0.1, 0.8) * w;
        s.gaps.emplace_back(x0, x0 + rng.uniform(0.05, 0.15) * w);
      }
      break;
    }
    case SubType::ild: {
      s.pleura_sigma = rng.uniform(2.5, 3.5);
      s.pleura_intensity = rng.uniform(0.7, 0.85);
      const auto n = rng.between(8, 14);
      for (long long i = 0; i < n; ++i) {
        Streak st;
        st.x = rng.uniform(0.1, 0.9) * w;
        st.sigma = rng.uniform(0.5, 0.9);
        st.intensity = rng.uniform(0.45, 0.6);
        st.length = rng.uniform(0.09, 0.22) * h;
        s.streaks.push_back(st);
      }
      break;
    }
    case SubType::healthy:
      s.a_line_intensity = rng.uniform(0.55, 0.7);
      s.speckle = rng.uniform(0.1, 0.2);
      break;
  }
  return s;
}

// Per-view copy with independent jitter of positions and strengths.
Scene jitter_view(const Scene& base, double w, Xoshiro256pp& rng) {
  Scene s = base;
  s.pleura_depth += rng.uniform(-1.5, 1.5);
  for (auto& st : s.streaks) {
    st.x += rng.uniform(-0.05, 0.05) * w;
    st.intensity = std::clamp(st.intensity * rng.uniform(0.9, 1.1), 0.0, 1.0);
  }
  for (auto& b : s.blobs) {
    b.x += rng.uniform(-0.05, 0.05) * w;
    b.y += rng.uniform(-2.0, 2.0);
  }
  if (s.type == SubType::cpe && s.streaks.size() > 3 && rng.bernoulli(0.3)) {
    s.streaks.erase(s.streaks.begin() + static_cast<std::ptrdiff_t>(rng.below(s.streaks.size())));
  }
  return s;
}

GrayImage render_frame(const Scene& view, std::size_t w, std::size_t h, double noise, Xoshiro256pp& rng) {
  // Frame-level motion: the whole pattern drifts and individual streaks flicker.
  const double dx = rng.uniform(-2.0, 2.0);
  const double dy = rng.uniform(-1.0, 1.0);
  std::vector<double> visible(view.streaks.size());
  for (std::size_t i = 0; i < visible.size(); ++i) {
    const double drop = view.type == SubType::cpe ? 0.1 : 0.2;
    visible[i] = rng.bernoulli(drop) ? 0.0 : rng.uniform(0.85, 1.0);
  }
  std::vector<double> streak_dx(view.streaks.size());
  for (auto& d : streak_dx) d = rng.uniform(-1.5, 1.5);

  std::vector<double> field(w * h, view.background);
  const double py = std::max(view.pleura_depth + dy, 2.0);
  for (std::size_t y = 0; y < h; ++y) {
    const double fy = static_cast<double>(y);
    double* row = field.data() + y * w;
    const double pleura = view.pleura_intensity * std::exp(-0.5 * std::pow((fy - py) / view.pleura_sigma, 2));
    for (std::size_t x = 0; x < w; ++x) {
      const double fx = static_cast<double>(x);
      bool in_gap = false;
      for (const auto& [g0, g1] : view.gaps) in_gap = in_gap || (fx - dx >= g0 && fx - dx < g1);
      row[x] += in_gap ? 0.2 * pleura : pleura;
    }
    if (fy > py) {
      const double depth = fy - py;
      for (std::size_t i = 0; i < view.streaks.size(); ++i) {
        const Streak& st = view.streaks[i];
        if (visible[i] == 0.0 || depth > st.length) continue;
        const double fade = 1.0 - 0.3 * depth / std::max(st.length, 1.0);
        const double cx = st.x + dx + streak_dx[i] + st.wobble * std::sin(depth / 4.0 + st.phase);
        const double amp = st.intensity * visible[i] * fade;
        const auto x0 = static_cast<std::size_t>(std::max(0.0, cx - 4 * st.sigma));
        const auto x1 = static_cast<std::size_t>(std::clamp(cx + 4 * st.sigma + 1, 0.0, static_cast<double>(w)));
        for (std::size_t x = x0; x < x1; ++x) row[x] += amp * std::exp(-0.5 * std::pow((static_cast<double>(x) - cx) / st.sigma, 2));
      }
      if (view.a_line_intensity > 0.0) {
        double a = 0.0;
        double strength = view.a_line_intensity;
        for (int k = 2; k * py < static_cast<double>(h) + 3; ++k) {
          a += strength * std::exp(-0.5 * std::pow((fy - k * py) / 1.2, 2));
          strength *= 0.75;
        }
        for (std::size_t x = 0; x < w; ++x) row[x] += a;
      }
    }
    for (const auto& b : view.blobs) {
      const double ry = (fy - b.y - dy) / b.radius;
      if (std::abs(ry) > 3) continue;
      for (std::size_t x = 0; x < w; ++x) {
        const double rx = (static_cast<double>(x) - b.x - dx) / b.radius;
        row[x] += b.intensity * std::exp(-0.5 * (rx * rx + ry * ry));
      }
    }
  }
  if (view.speckle > 0.0) {
    for (auto& v : field) v += view.speckle * rng.uniform() * rng.uniform();
  }
  GrayImage out(w, h);
  for (std::size_t i = 0; i < field.size(); ++i) {
    const double v = noise > 0.0 ? field[i] + noise * rng.normal() : field[i];
    out.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  }
  return out;
}

}  // namespace

ExamRecord generate_exam(int label, SubType sub_type, std::uint64_t seed, const SynthSpec& spec) {
  if (label != 0 && label != 1) throw ConfigError("label must be 0 or 1");
  if (label == 1) sub_type = SubType::cpe;
  if (label == 0 && sub_type == SubType::cpe) throw ConfigError("label 0 needs a non-cardiogenic sub-type");
  spec.validate();
  const double w = static_cast<double>(spec.frame_width);
  const double h = static_cast<double>(spec.frame_height);
  Xoshiro256pp scene_rng(derive_seed(seed, "scene"));
  const Scene scene = make_scene(sub_type, w, h, scene_rng);

  ExamRecord exam;
  exam.label = label;
  for (int v = 0; v < kViews; ++v) {
    Xoshiro256pp rng(derive_seed(seed, static_cast<std::uint64_t>(v + 1)));
    const Scene view = jitter_view(scene, w, rng);
    VideoClip& clip = exam.views[static_cast<std::size_t>(v)];
    clip.view_index = v + 1;
    clip.frames.reserve(spec.frames_per_video);
    for (std::size_t f = 0; f < spec.frames_per_video; ++f) {
      clip.frames.push_back(render_frame(view, spec.frame_width, spec.frame_height, spec.noise_level, rng));
    }
  }
  return exam;
}

double column_variance_score(const ExamRecord& exam) {
  double total = 0.0;
  std::size_t frames = 0;
  for (const auto& view : exam.views) {
    for (const auto& f : view.frames) {
      std::vector<double> means(f.width, 0.0);
      for (std::size_t y = 0; y < f.height; ++y)
        for (std::size_t x = 0; x < f.width; ++x) means[x] += f.at(x, y) / 255.0;
      double mu = 0.0;
      for (auto& m : means) mu += (m /= static_cast<double>(f.height));
      mu /= static_cast<double>(f.width);
      double var = 0.0;
      for (double m : means) var += (m - mu) * (m - mu);
      total += var / static_cast<double>(f.width);
      ++frames;
    }
  }
  return frames ? total / static_cast<double>(frames) : 0.0;
}

}  // namespace zachvit
