#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "bandmix/tensor.hpp"

namespace bandmix::nn {

/// Seeded generator with platform-independent uniform draws (the standard
/// distributions are implementation-defined, raw mt19937_64 output is not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller.
  double normal() {
    const double u1 = 1.0 - uniform(), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
  std::uint64_t next() { return engine_(); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * n); }

 private:
  std::mt19937_64 engine_;
};

template <typename T>
void fill_uniform(Tensor<T>& t, Rng& rng, double bound) {
  for (auto& v : t.vec()) v = static_cast<T>(rng.uniform(-bound, bound));
}

}  // namespace bandmix::nn
