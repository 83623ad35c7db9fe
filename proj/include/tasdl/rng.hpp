#pragma once

// SplitMix64 stream plus a counter-based substream derivation.
//
// Every stochastic quantity in the toolkit is drawn from a Stream whose state
// is a single 64-bit word. Substreams are derived from (seed, index) by
// hashing, so element i of a batch never depends on how many elements were
// generated before it or on which thread generated it. The Gaussian sampler is
// a plain Box-Muller transform so bit patterns do not depend on the standard
// library's distribution implementations.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace tasdl::rng {

/// SplitMix64 finalizer (Stafford variant 13).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Stream {
 public:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  constexpr explicit Stream(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next_u64() noexcept {
    state_ += kGolden;
    return mix64(state_);
  }

  /// Uniform on [0, 1) with 53 random bits.
  constexpr double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0, 1]; safe as a log argument.
  constexpr double uniform_open0() noexcept {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Uniform integer on [0, n). Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t n) noexcept {
    if (n == 0) return 0;
    __uint128_t m = static_cast<__uint128_t>(next_u64()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<__uint128_t>(next_u64()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Pair of independent standard normals (Box-Muller).
  void normal_pair(double& a, double& b) noexcept {
    const double r = std::sqrt(-2.0 * std::log(uniform_open0()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    a = r * std::cos(theta);
    b = r * std::sin(theta);
  }

  constexpr std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

/// Seed for substream `index` of the stream family identified by `seed`.
constexpr std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(mix64(seed ^ 0x6a09e667f3bcc909ULL) + index * Stream::kGolden);
}

constexpr Stream substream(std::uint64_t seed, std::uint64_t index) noexcept {
  return Stream(substream_seed(seed, index));
}

}  // namespace tasdl::rng
