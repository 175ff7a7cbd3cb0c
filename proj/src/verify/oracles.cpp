#include <algorithm>
#include <cmath>

#include "zachvit/errors.h"
#include "zachvit/tape.h"
#include "zachvit/verify.h"

namespace zachvit::verify {

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

GradCheckReport check_gradients(std::span<Parameter* const> params, const std::function<Tensor()>& loss,
                                double step, std::size_t max_per_param) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(loss());
  }
  GradCheckReport report;
  for (Parameter* p : params) {
    const std::vector<double> analytic = p->grad();
    const std::vector<double> base(p->value().values().begin(), p->value().values().end());
    const std::size_t n = base.size();
    const std::size_t stride = std::max<std::size_t>(1, n / std::min(n, max_per_param));
    for (std::size_t i = 0; i < n; i += stride) {
      auto probe = base;
      probe[i] = base[i] + step;
      p->assign(probe);
      const double up = loss().item();
      probe[i] = base[i] - step;
      p->assign(probe);
      const double down = loss().item();
      p->assign(base);
      const double numeric = (up - down) / (2.0 * step);
      const double rel = relative_error(analytic[i], numeric);
      report.max_abs_error = std::max(report.max_abs_error, std::abs(analytic[i] - numeric));
      if (rel >= report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst = p->name() + "[" + std::to_string(i) + "]";
      }
      ++report.elements;
    }
  }
  return report;
}

double pairwise_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("pairwise_auc: size mismatch");
  double concordant = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) concordant += 1.0;
      else if (scores[i] == scores[j]) concordant += 0.5;
    }
  }
  if (pairs == 0) throw UndefinedMetricError("pairwise_auc: needs both classes");
  return concordant / static_cast<double>(pairs);
}

std::vector<std::size_t> reference_shuffle(std::size_t n, std::uint64_t seed) {
  std::uint64_t sm = seed;
  auto splitmix = [&sm]() {
    sm += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = sm;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  };
  std::uint64_t s[4] = {splitmix(), splitmix(), splitmix(), splitmix()};
  auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
  auto next = [&]() {
    const std::uint64_t result = rotl(s[0] + s[3], 23) + s[0];
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
  };
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::uint64_t bound = i;
    const std::uint64_t threshold = (0 - bound) % bound;
    std::uint64_t r;
    do {
      r = next();
    } while (r < threshold);
    std::swap(perm[i - 1], perm[r % bound]);
  }
  return perm;
}

}  // namespace zachvit::verify
