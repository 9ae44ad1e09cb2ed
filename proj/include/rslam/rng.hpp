#pragma once

#include <cmath>
#include <cstdint>

namespace rslam {

// splitmix64 generator with hand-rolled distribution transforms. std::
// distributions are implementation-defined, which would break bit-identical
// replay of seeded datasets across standard libraries.
struct Rng {
  uint64_t state = 0;

  explicit Rng(uint64_t seed) : state(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int n) { return int(next_u64() % uint64_t(n)); }

  double gaussian() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * M_PI * uniform());
  }

  double rayleigh(double sigma) {
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return sigma * std::sqrt(-2.0 * std::log(u));
  }

  int poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    const double limit = std::exp(-lambda);
    double p = 1.0;
    int k = 0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  // Derives an independent seed for stream `index`.
  static uint64_t derive(uint64_t seed, uint64_t index) {
    Rng r(seed ^ (0xD1B54A32D192ED03ull * (index + 1)));
    return r.next_u64();
  }
};

}  // namespace rslam
