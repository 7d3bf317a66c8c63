#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace mmhash {

/// Deterministic random source. The generator sequence of std::mt19937_64 is
/// pinned by the standard, and the distributions below are hand-rolled, so a
/// given (seed, stream) pair produces the same values on every platform.
/// Distinct consumers (parameter init, epoch shuffling, synthetic data) take
/// distinct stream ids so they never share a sequence.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0) : gen_(mix(seed, stream)) {}

  uint64_t bits() { return gen_(); }

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (spare value cached).
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 == 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.141592653589793238462643383279502884 * uniform();
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  /// Unbiased integer in [0, n). n must be nonzero.
  uint64_t below(uint64_t n) {
    const uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      const uint64_t r = gen_();
      if (r >= threshold) return r % n;
    }
  }

  /// In-place Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static uint64_t mix(uint64_t seed, uint64_t stream) {
    // splitmix64 finalizer over seed and stream
    uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stream ids used across the engine.
inline constexpr uint64_t kStreamInit = 1;
inline constexpr uint64_t kStreamShuffle = 2;
inline constexpr uint64_t kStreamSynthetic = 3;

}  // namespace mmhash
