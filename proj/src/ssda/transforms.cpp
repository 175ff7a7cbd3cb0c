#include <algorithm>
#include <numeric>

#include "zachvit/errors.h"
#include "zachvit/rng.h"
#include "zachvit/ssda.h"

namespace zachvit {

bool is_prime_seed(std::uint64_t seed) {
  return std::find(kPrimeSeeds.begin(), kPrimeSeeds.end(), seed) != kPrimeSeeds.end();
}

std::vector<ViewOrder> view_permutations() {
  std::vector<ViewOrder> out;
  ViewOrder order{1, 2, 3, 4};
  do {
    out.push_back(order);
  } while (std::next_permutation(order.begin(), order.end()));
  return out;
}

void validate_view_order(const ViewOrder& order) {
  ViewOrder sorted = order;
  std::sort(sorted.begin(), sorted.end());
  if (sorted != ViewOrder{1, 2, 3, 4}) throw InputError("view order " + order_string(order) + " is not a permutation of 1..4");
}

std::string order_string(const ViewOrder& order) {
  std::string s = "[";
  for (std::size_t i = 0; i < 4; ++i) s += (i ? "," : "") + std::to_string(order[i]);
  return s + "]";
}

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  if (text == "all") return {kPrimeSeeds.begin(), kPrimeSeeds.end()};
  std::vector<std::uint64_t> seeds;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("regime: bad seed '" + item + "' in '" + text + "'");
    }
    seeds.push_back(std::stoull(item));
    pos = comma + 1;
  }
  return seeds;
}

}  // namespace

RegimeSpec RegimeSpec::parse(const std::string& text) {
  RegimeSpec r;
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string tail = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (head == "vi" && tail.empty()) {
    r.mode = RegimeMode::vi;
  } else if (head == "svi") {
    r.mode = RegimeMode::svi;
    if (tail.empty()) throw ConfigError("regime svi needs a seed, e.g. svi:2");
    r.seeds = parse_seed_list(tail);
  } else if (head == "vis" && tail.empty()) {
    r.mode = RegimeMode::vis;
  } else if ((head == "ssda" || head == "ssda0") && tail.empty()) {
    r.mode = RegimeMode::ssda;
  } else if (head == "ssda") {
    r.mode = RegimeMode::ssda;
    r.seeds = parse_seed_list(tail);
  } else {
    throw ConfigError("unknown regime '" + text + "' (expected vi, svi:<seed>, vis, ssda0 or ssda:<seeds>)");
  }
  r.validate();
  return r;
}

std::string RegimeSpec::tag() const {
  std::string seeds_text;
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds_text += (i ? "," : "") + std::to_string(seeds[i]);
  switch (mode) {
    case RegimeMode::vi: return "vi";
    case RegimeMode::svi: return "svi:" + seeds_text;
    case RegimeMode::vis: return "vis";
    case RegimeMode::ssda: return seeds.empty() ? "ssda0" : "ssda:" + seeds_text;
  }
  return "?";
}

void RegimeSpec::validate() const {
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (!is_prime_seed(seeds[i])) {
      throw ConfigError("seed " + std::to_string(seeds[i]) + " is not one of 2,3,5,7,11,13,17,19,23,29");
    }
    if (std::find(seeds.begin(), seeds.begin() + static_cast<std::ptrdiff_t>(i), seeds[i]) !=
        seeds.begin() + static_cast<std::ptrdiff_t>(i)) {
      throw ConfigError("seed " + std::to_string(seeds[i]) + " is listed twice");
    }
  }
  if (mode == RegimeMode::svi && seeds.size() != 1) throw ConfigError("svi takes exactly one seed");
  if ((mode == RegimeMode::vi || mode == RegimeMode::vis) && !seeds.empty()) {
    throw ConfigError(tag() + " does not take seeds");
  }
}

std::size_t RegimeSpec::expansion_factor() const {
  switch (mode) {
    case RegimeMode::vi:
    case RegimeMode::svi: return 4;
    case RegimeMode::vis: return 1;
    case RegimeMode::ssda: return 24 * (1 + seeds.size());
  }
  return 0;
}

FloatImage video_to_vi(std::span<const FloatImage> frames, std::size_t width, std::size_t height) {
  if (frames.empty()) throw InputError("video has no frames");
  return resize_bilinear(hconcat(frames), width, height);
}

FrameStack shuffle_frames(std::span<const FloatImage> frames, std::uint64_t seed) {
  if (!is_prime_seed(seed)) throw ConfigError("shuffle seed " + std::to_string(seed) + " is not in the prime list");
  Xoshiro256pp rng(seed);
  const auto order = shuffled_indices(frames.size(), rng);
  FrameStack out;
  out.reserve(frames.size());
  for (auto i : order) out.push_back(frames[i]);
  return out;
}

FloatImage video_to_svi(std::span<const FloatImage> frames, std::uint64_t seed, std::size_t width,
                        std::size_t height) {
  const FrameStack shuffled = shuffle_frames(frames, seed);
  return video_to_vi(shuffled, width, height);
}

FloatImage exam_to_vis(const std::array<FrameStack, 4>& views, const ViewOrder& order, const StrideGeometry& geometry) {
  validate_view_order(order);
  std::array<FloatImage, 4> bands;
  for (std::size_t v = 0; v < 4; ++v) bands[v] = video_to_vi(views[v], geometry.width, geometry.band_height);
  std::array<FloatImage, 4> stacked;
  for (std::size_t i = 0; i < 4; ++i) stacked[i] = bands[static_cast<std::size_t>(order[i] - 1)];
  return vconcat(stacked);
}

StrideImage canonical_vis(const PreparedExam& exam, const StrideGeometry& geometry) {
  return {exam_to_vis(exam.views, {1, 2, 3, 4}, geometry), {exam.patient_id, "vis", {1, 2, 3, 4}, std::nullopt}};
}

namespace {

// Bands are rendered once per frame arrangement and reused for all 24 orders.
void emit_orders(const std::array<FrameStack, 4>& views, const PreparedExam& exam, const std::string& tag,
                 std::optional<std::uint64_t> seed, const StrideGeometry& geometry, std::vector<StrideImage>& out) {
  std::array<FloatImage, 4> bands;
  for (std::size_t v = 0; v < 4; ++v) bands[v] = video_to_vi(views[v], geometry.width, geometry.band_height);
  for (const auto& order : view_permutations()) {
    std::array<FloatImage, 4> stacked;
    for (std::size_t i = 0; i < 4; ++i) stacked[i] = bands[static_cast<std::size_t>(order[i] - 1)];
    out.push_back({vconcat(stacked), {exam.patient_id, tag, order, seed}});
  }
}

}  // namespace

std::vector<StrideImage> ssda_expand(const PreparedExam& exam, const RegimeSpec& regime,
                                     const StrideGeometry& geometry) {
  regime.validate();
  geometry.validate();
  std::vector<StrideImage> out;
  out.reserve(regime.expansion_factor());
  const std::string tag = regime.tag();
  switch (regime.mode) {
    case RegimeMode::vi:
      for (int v = 0; v < 4; ++v) {
        out.push_back({video_to_vi(exam.views[static_cast<std::size_t>(v)], geometry.width, geometry.height()),
                       {exam.patient_id, tag, {v + 1, 0, 0, 0}, std::nullopt}});
      }
      break;
    case RegimeMode::svi:
      for (int v = 0; v < 4; ++v) {
        out.push_back({video_to_svi(exam.views[static_cast<std::size_t>(v)], regime.seeds.front(), geometry.width,
                                    geometry.height()),
                       {exam.patient_id, tag, {v + 1, 0, 0, 0}, regime.seeds.front()}});
      }
      break;
    case RegimeMode::vis:
      out.push_back(canonical_vis(exam, geometry));
      out.back().provenance.regime = tag;
      break;
    case RegimeMode::ssda:
      emit_orders(exam.views, exam, tag, std::nullopt, geometry, out);
      for (const auto seed : regime.seeds) {
        std::array<FrameStack, 4> shuffled;
        for (std::size_t v = 0; v < 4; ++v) shuffled[v] = shuffle_frames(exam.views[v], seed);
        emit_orders(shuffled, exam, tag, seed, geometry, out);
      }
      break;
  }
  return out;
}

std::string stride_file_name(const StrideProvenance& p) {
  std::string perm;
  for (int v : p.permutation) perm += std::to_string(v);
  return p.patient_id + "_s" + std::to_string(p.seed.value_or(0)) + "_p" + perm + ".pgm";
}

}  // namespace zachvit
