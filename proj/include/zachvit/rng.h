#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace zachvit {

// splitmix64 (Steele, Lea, Flood). Used to expand a 64-bit seed into
// xoshiro state and to derive independent sub-stream seeds.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

// xoshiro256++ (Blackman, Vigna). All stochastic code in the project draws
// from an explicit instance of this generator.
class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed);

  std::uint64_t next();

  // Uniform double in [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, bound) by rejection of the low remainder band.
  std::uint64_t below(std::uint64_t bound);

  // Integer in [lo, hi] inclusive.
  long long between(long long lo, long long hi) {
    return lo + static_cast<long long>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  // Standard normal via Box-Muller (one draw per call, second discarded).
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t s_[4];
};

// Deterministic sub-stream seed for (base, key...).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t key);
std::uint64_t derive_seed(std::uint64_t base, std::string_view key);

// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::string_view text);

// Fisher-Yates, iterating i = n-1 .. 1 and swapping with j = below(i + 1).
template <class T>
void fisher_yates(std::span<T> items, Xoshiro256pp& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

// Permutation of 0..n-1 produced by shuffling the identity.
std::vector<std::size_t> shuffled_indices(std::size_t n, Xoshiro256pp& rng);

}  // namespace zachvit
