#pragma once

// Small fully specified RNG so seeded fixtures are reproducible everywhere.
//
// State update (SplitMix64):
//   s += 0x9E3779B97F4A7C15
//   z  = s
//   z  = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z  = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   out = z ^ (z >> 31)
// uniform() takes the top 53 bits; normal() is Box-Muller on two uniforms
// (one value per call, the partner is discarded).

#include <cmath>
#include <cstdint>
#include <numbers>

namespace gridcast {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : s_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (s_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // [0, n)
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

 private:
  std::uint64_t s_;
};

/// Derives an independent stream seed for a sub-task (line k of seed s, ...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t k) {
  SplitMix64 r(seed ^ (0xD1B54A32D192ED03ull * (k + 1)));
  return r.next();
}

}  // namespace gridcast
