#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

namespace catchphrase {

/// PCG32 (XSH-RR output, 64-bit LCG state), matching the reference
/// pcg32_random_r. Every random draw in the library goes through this type and
/// the helpers below so that outputs do not depend on the standard library's
/// distribution implementations.
class Pcg32 {
 public:
  using result_type = std::uint32_t;
  static constexpr std::uint32_t kVersion = 1;

  explicit Pcg32(std::uint64_t seed = 0x853c49e6748fea9bULL,
                 std::uint64_t stream = 0xda3e39cb94b95bdbULL) {
    seed_stream(seed, stream);
  }

  void seed_stream(std::uint64_t seed, std::uint64_t stream) {
    state_ = 0;
    inc_ = (stream << 1u) | 1u;
    next();
    state_ += seed;
    next();
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return 0xffffffffu; }
  result_type operator()() { return next(); }

  std::uint32_t next() {
    std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    auto rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
  }

  /// Uniform integer in [0, bound), unbiased (rejection on the low threshold).
  std::uint32_t bounded(std::uint32_t bound) {
    std::uint32_t threshold = (-bound) % bound;
    for (;;) {
      std::uint32_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  /// Uniform real in the open interval (0, 1), 53-bit resolution.
  double uniform_open() {
    std::uint64_t hi = next() >> 5;  // 27 bits
    std::uint64_t lo = next() >> 6;  // 26 bits
    std::uint64_t k = (hi << 26) | lo;
    return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform_open();
    double u2 = uniform_open();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Derives an independent generator for a named sub-task from a base seed.
inline Pcg32 derive_rng(std::uint64_t seed, std::uint64_t stream) {
  return Pcg32(seed, stream);
}

/// Chooses min(count, n) distinct indices of [0, n) with a partial
/// Fisher-Yates shuffle. Order is the draw order.
inline std::vector<std::size_t> sample_without_replacement(Pcg32& rng, std::size_t n,
                                                           std::size_t count) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::size_t take = count < n ? count : n;
  for (std::size_t i = 0; i < take; ++i) {
    auto j = i + rng.bounded(static_cast<std::uint32_t>(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(take);
  return idx;
}

}  // namespace catchphrase
