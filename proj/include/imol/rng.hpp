#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace imol {

/// Deterministic random source. All randomness in the library flows through
/// this wrapper so that a run is a pure function of its seed; distribution
/// sampling is implemented here instead of <random>'s distribution objects,
/// whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  /// Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  int uniform_int(int n) {
    // modulo bias is negligible for the small n used here, but reject anyway
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % static_cast<std::uint64_t>(n);
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return static_cast<int>(x % static_cast<std::uint64_t>(n));
  }

  /// Standard normal via Box-Muller (one value per call, two raw draws).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Derive an independent stream (e.g. one per experiment phase).
  Rng split(std::uint64_t stream) {
    return Rng(engine_() ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace imol
