#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace edgesplit {

// SplitMix64 (Steele, Lea, Flood 2014). Chosen over <random> engines because
// the output sequence and the derived uniform/normal draws below are fully
// specified here, so traces and synthetic tensors reproduce bit-for-bit on
// any platform.
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  constexpr double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; one draw per call (the sine branch is
  // discarded so the stream position stays simple to reason about).
  double normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
};

// Combine two 64-bit values into one seed.
constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
  SplitMix64 g(a ^ (b * 0xD1B54A32D192ED03ULL));
  return g.next();
}

}  // namespace edgesplit
