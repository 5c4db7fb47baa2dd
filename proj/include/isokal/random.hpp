#pragma once

// Reproducible Gaussian streams.
//
// Generator: std::mt19937_64 (bit-exact across standard libraries), seeded
// with splitmix64(seed). Uniforms take the top 53 bits and are shifted to the
// open interval (0, 1). Normals come from the Box-Muller transform, both
// values of each pair used in order (r cos t first, then r sin t).
//
// Per-trial seeds: derive_seed(master, trial) = splitmix64(master ^ splitmix64(trial)).

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>

namespace isokal {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t trial) {
  return splitmix64(master ^ splitmix64(trial));
}

class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  /// Uniform on (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal.
  double normal() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double t = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(t);
    return r * std::cos(t);
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

}  // namespace isokal
