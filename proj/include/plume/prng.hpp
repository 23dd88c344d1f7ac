#pragma once

#include <cmath>
#include <cstdint>

#include "plume/tensor.hpp"

namespace plume {

/// SplitMix64 generator. The output stream depends only on the seed, so
/// parameter initialization is identical on every platform.
class Prng {
 public:
  explicit Prng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (one value per call, no caching).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  /// Derive an independent stream for a named sub-component.
  Prng fork(std::uint64_t salt) { return Prng(next_u64() ^ (salt * 0xD6E8FEB86659FD93ull)); }

 private:
  std::uint64_t state_;
};

/// Tensor of i.i.d. uniform(lo, hi) entries.
template <typename Real>
BasicTensor<Real> uniform_tensor(Shape shape, Prng& rng, double lo, double hi) {
  BasicTensor<Real> t(shape);
  for (auto& v : t.data()) v = static_cast<Real>(rng.uniform(lo, hi));
  return t;
}

/// Default layer initialization: uniform(-b, b) with b = 1 / sqrt(fan_in).
template <typename Real>
BasicTensor<Real> fan_in_uniform(Shape shape, int fan_in, Prng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return uniform_tensor<Real>(shape, rng, -bound, bound);
}

}  // namespace plume
