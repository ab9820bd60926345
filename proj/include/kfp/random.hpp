#pragma once

// Portable random draws: mt19937_64 bits mapped by hand, so sequences do not depend on the
// standard library's distribution implementations.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace kfp {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Standard normal (Box-Muller, one value per call).
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t bits() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace kfp
