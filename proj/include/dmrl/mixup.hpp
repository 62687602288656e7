#pragma once

#include <cstdint>
#include <vector>

#include "dmrl/rng.hpp"
#include "dmrl/tensor.hpp"

namespace dmrl {

// Convex combination of a batch with a permutation of itself, together with
// the coefficient and pairing that produced it.
struct MixedBatch {
  Tensor x_mixed;
  Tensor y_mixed;  // undefined when the batch carries no labels
  double lambda = 1.0;
  std::vector<size_t> perm;
};

// Draws lambda ~ Beta(alpha, alpha) through the two-gamma construction
// lambda = X / (X + Y). Gamma variates come from Marsaglia-Tsang squeeze
// sampling, with the alpha < 1 case boosted via Gamma(alpha + 1) and a
// U^(1/alpha) scaling. Draws are clamped into [1e-12, 1 - 1e-12]: Beta with
// small alpha puts enough mass at the ends that raw draws can round to
// exactly 0 or 1 in double precision.
class BetaSampler {
 public:
  BetaSampler(double alpha, uint64_t seed);
  double sample();
  double alpha() const { return alpha_; }

 private:
  double sample_gamma(double shape);
  double alpha_;
  RngStream rng_;
};

// x_mixed[i] = lambda * x[i] + (1 - lambda) * x[perm[i]]. Value-level;
// operates on raw batches before they enter any tape.
Tensor mix_inputs(const Tensor& x, const std::vector<size_t>& perm, double lambda);

// Rowwise convex combination of label distributions; rows of y must sum
// to 1, and output rows do as well.
Tensor mix_labels(const Tensor& y, const std::vector<size_t>& perm, double lambda);

}  // namespace dmrl
