#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace eqbundle {

// Deterministic random source. The engine is mt19937_64 (bit-exact by the
// standard); all variate transforms are hand-rolled here because the
// std::*_distribution classes are implementation-defined and would break
// the reproducibility contract across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard exponential via inversion.
  double exponential() { return -std::log1p(-uniform01()); }

  // Flat Dirichlet: normalized i.i.d. exponentials.
  std::vector<double> dirichlet_flat(int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    double sum = 0.0;
    for (auto& x : w) {
      x = exponential();
      sum += x;
    }
    if (sum <= 0.0) {  // all draws hit the u=0 corner; fall back to uniform
      for (auto& x : w) x = 1.0 / n;
      return w;
    }
    for (auto& x : w) x /= sum;
    return w;
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace eqbundle
