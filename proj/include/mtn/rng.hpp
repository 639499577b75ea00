#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace mtn::rng {

// Counter-based generator built on the SplitMix64 finalizer. Every draw is a
// pure function of (seed, stream path, counter), so banks and samplers are
// reproducible regardless of evaluation order or thread schedule.

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// One independent stream of uniform draws, addressable by counter.
/// Sub-streams (per subdomain, per neuron, per sampling round) are derived
/// with `sub`, which keys a fresh stream off this one.
struct Stream {
  std::uint64_t key = 0;

  static Stream root(std::uint64_t seed) noexcept { return {mix64(seed + kGolden)}; }

  Stream sub(std::uint64_t id) const noexcept {
    return {mix64(key ^ mix64(id * kGolden + 0x632BE59BD9B4E019ull))};
  }

  std::uint64_t bits(std::uint64_t counter) const noexcept {
    return mix64(key + (counter + 1) * kGolden);
  }

  /// Uniform in [0, 1), 53 usable bits.
  double uniform(std::uint64_t counter) const noexcept {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }
};

/// Box-Muller pair from uniform counters (c, c+1). Chosen over ziggurat-style
/// samplers so the output is a fixed closed-form function of the counters.
inline void gaussian_pair(const Stream& s, std::uint64_t c, double& g0, double& g1) noexcept {
  const double u1 = 1.0 - s.uniform(c);  // (0, 1]; log stays finite
  const double u2 = s.uniform(c + 1);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  g0 = r * std::cos(a);
  g1 = r * std::sin(a);
}

/// Sequential adapter: hands out draws from a stream while advancing a counter.
struct Counter {
  Stream stream;
  std::uint64_t next = 0;

  double uniform() { return stream.uniform(next++); }
  std::uint64_t bits() { return stream.bits(next++); }
  void gaussian(double& g0, double& g1) {
    rng::gaussian_pair(stream, next, g0, g1);
    next += 2;
  }
  /// Uniform integer in [0, n) by rejection-free scaling (n small).
  std::uint64_t below(std::uint64_t n) { return bits() % n; }
};

}  // namespace mtn::rng
