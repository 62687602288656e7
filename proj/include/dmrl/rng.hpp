#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace dmrl {

// Deterministic random stream. Every source of randomness in the project is
// a named stream seeded from the run seed, so reruns reproduce bit-identical
// results. Raw bits come from mt19937_64; the conversions below are fixed
// here rather than delegated to std distributions, whose output is
// implementation-defined.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1).
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  // Standard normal via the polar method. The number of engine draws per
  // call varies, but the stream stays deterministic for a given seed.
  double normal();

  // Unbiased integer in [0, n). n must be positive.
  size_t index(size_t n);

  // Combines a base seed with a stream tag (splitmix64 finalizer).
  static uint64_t mix(uint64_t seed, uint64_t tag);

 private:
  std::mt19937_64 eng_;
};

// Fisher-Yates shuffle of 0..n-1.
std::vector<size_t> random_permutation(size_t n, RngStream& rng);

}  // namespace dmrl
