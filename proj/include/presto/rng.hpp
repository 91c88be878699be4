#pragma once

#include <cmath>
#include <cstdint>

namespace presto {

// Counter-based splittable RNG. Every draw is a hash of (seed, stream,
// counter), so child streams are independent of draw order and results are
// identical across platforms. The mixer is the splitmix64 finalizer.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0)
      : key_(mix(seed ^ mix(stream + 0x9e3779b97f4a7c15ULL))), counter_(0) {}

  // Child stream derived from this stream's key; does not consume draws.
  Rng split(uint64_t stream) const { return Rng(key_, stream + 1); }

  uint64_t next_u64() { return mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

  // Uniform in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), n > 0.
  uint64_t uniform_int(uint64_t n) { return uint64_t(uniform() * double(n)) % n; }

  // Standard normal via Box-Muller (no cached spare, keeps draws counter-pure).
  double normal() {
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Normal(0, sigma) resampled until within 2 sigma.
  double trunc_normal(double sigma) {
    for (;;) {
      double z = normal();
      if (std::fabs(z) <= 2.0) return z * sigma;
    }
  }

 private:
  static uint64_t mix(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  uint64_t key_;
  uint64_t counter_;
};

}  // namespace presto
