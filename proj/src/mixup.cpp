#include "dmrl/mixup.hpp"

#include <cmath>
#include <stdexcept>

namespace dmrl {

namespace {

constexpr double kLambdaEps = 1e-12;

void check_perm(const std::vector<size_t>& perm, size_t n) {
  if (perm.size() != n) {
    throw std::invalid_argument("mixup: permutation length " + std::to_string(perm.size()) +
                                " does not match batch size " + std::to_string(n));
  }
  std::vector<bool> seen(n, false);
  for (size_t p : perm) {
    if (p >= n || seen[p]) throw std::invalid_argument("mixup: pairing is not a permutation");
    seen[p] = true;
  }
}

}  // namespace

BetaSampler::BetaSampler(double alpha, uint64_t seed) : alpha_(alpha), rng_(seed) {
  if (!(alpha > 0.0)) throw std::invalid_argument("BetaSampler: alpha must be positive");
}

double BetaSampler::sample_gamma(double shape) {
  if (shape < 1.0) {
    const double g = sample_gamma(shape + 1.0);
    const double u = rng_.uniform_open();
    return g * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng_.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng_.uniform_open();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double BetaSampler::sample() {
  const double x = sample_gamma(alpha_);
  const double y = sample_gamma(alpha_);
  double lambda = x / (x + y);
  if (lambda < kLambdaEps) lambda = kLambdaEps;
  if (lambda > 1.0 - kLambdaEps) lambda = 1.0 - kLambdaEps;
  return lambda;
}

Tensor mix_inputs(const Tensor& x, const std::vector<size_t>& perm, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("mix_inputs: lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
  if (x.rank() < 1) throw std::invalid_argument("mix_inputs: rank-0 tensor");
  const size_t n = x.dim(0);
  check_perm(perm, n);
  const size_t row = x.numel() / n;
  const auto& xd = x.data();
  std::vector<double> out(x.numel());
  for (size_t i = 0; i < n; ++i) {
    const double* a = xd.data() + i * row;
    const double* b = xd.data() + perm[i] * row;
    double* dst = out.data() + i * row;
    for (size_t j = 0; j < row; ++j) dst[j] = lambda * a[j] + (1.0 - lambda) * b[j];
  }
  return Tensor(x.shape(), std::move(out));
}

Tensor mix_labels(const Tensor& y, const std::vector<size_t>& perm, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("mix_labels: lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
  if (y.rank() != 2) throw std::invalid_argument("mix_labels: expected [N x K], got " + shape_string(y.shape()));
  const size_t n = y.dim(0), k = y.dim(1);
  check_perm(perm, n);
  const auto& yd = y.data();
  for (size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (size_t j = 0; j < k; ++j) s += yd[i * k + j];
    if (std::fabs(s - 1.0) > 1e-9) {
      throw std::invalid_argument("mix_labels: row " + std::to_string(i) + " sums to " + std::to_string(s) +
                                  ", expected 1");
    }
  }
  std::vector<double> out(y.numel());
  for (size_t i = 0; i < n; ++i) {
    const double* a = yd.data() + i * k;
    const double* b = yd.data() + perm[i] * k;
    double* dst = out.data() + i * k;
    for (size_t j = 0; j < k; ++j) dst[j] = lambda * a[j] + (1.0 - lambda) * b[j];
  }
  return Tensor(y.shape(), std::move(out));
}

}  // namespace dmrl
