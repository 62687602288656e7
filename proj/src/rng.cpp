#include "dmrl/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace dmrl {

double RngStream::normal() {
  for (;;) {
    double u = 2.0 * uniform() - 1.0;
    double v = 2.0 * uniform() - 1.0;
    double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) {
      return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }
}

size_t RngStream::index(size_t n) {
  if (n == 0) throw std::invalid_argument("RngStream::index: n must be positive");
  const uint64_t limit = UINT64_MAX - UINT64_MAX % static_cast<uint64_t>(n);
  for (;;) {
    uint64_t x = eng_();
    if (x < limit) return static_cast<size_t>(x % static_cast<uint64_t>(n));
  }
}

uint64_t RngStream::mix(uint64_t seed, uint64_t tag) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<size_t> random_permutation(size_t n, RngStream& rng) {
  std::vector<size_t> perm(n);
  for (size_t i = 0; i < n; ++i) perm[i] = i;
  for (size_t i = n; i > 1; --i) {
    size_t j = rng.index(i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

}  // namespace dmrl
