#include "dmrl/objectives.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dmrl/ops.hpp"

namespace dmrl {

Variant parse_variant(const std::string& s) {
  if (s == "full") return Variant::full;
  if (s == "no_dm") return Variant::no_dm;
  if (s == "no_cm") return Variant::no_cm;
  if (s == "no_lcm") return Variant::no_lcm;
  if (s == "no_ucm") return Variant::no_ucm;
  if (s == "dann") return Variant::dann;
  if (s == "source_only") return Variant::source_only;
  throw std::invalid_argument("unknown variant: " + s);
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_dm: return "no_dm";
    case Variant::no_cm: return "no_cm";
    case Variant::no_lcm: return "no_lcm";
    case Variant::no_ucm: return "no_ucm";
    case Variant::dann: return "dann";
    case Variant::source_only: return "source_only";
  }
  throw std::logic_error("unreachable variant");
}

void HyperParams::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("hyperparams: alpha must be positive");
  if (lambda_s < 0.0 || lambda_t < 0.0 || lambda_r < 0.0) {
    throw std::invalid_argument("hyperparams: loss weights must be nonnegative");
  }
  if (!(eta0 > 0.0) || !(theta > 0.0) || !(beta_exp > 0.0) || !(delta > 0.0)) {
    throw std::invalid_argument("hyperparams: schedule constants must be positive");
  }
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("hyperparams: momentum must lie in [0, 1)");
  if (batch_size == 0) throw std::invalid_argument("hyperparams: batch_size must be positive");
}

bool LossBreakdown::finite() const {
  for (double v : {l_c, l_s_r, l_t_r, l_adv, l_adv_r, total_gc, total_d}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string LossBreakdown::describe() const {
  std::ostringstream os;
  os << "l_c=" << l_c << " l_s_r=" << l_s_r << " l_t_r=" << l_t_r << " l_adv=" << l_adv << " l_adv_r=" << l_adv_r
     << " total_gc=" << total_gc << " total_d=" << total_d << " lambda_d=" << lambda_d;
  return os.str();
}

EffectiveCoeffs apply_variant(const HyperParams& hp) {
  EffectiveCoeffs c;
  c.lambda_s = hp.lambda_s;
  c.lambda_t = hp.lambda_t;
  c.lambda_r = hp.lambda_r;
  c.lambda_d_scale = 1.0;
  switch (hp.variant) {
    case Variant::full:
      break;
    case Variant::no_dm:
      c.lambda_r = 0.0;
      break;
    case Variant::no_cm:
      c.lambda_s = 0.0;
      c.lambda_t = 0.0;
      break;
    case Variant::no_lcm:
      c.lambda_s = 0.0;
      break;
    case Variant::no_ucm:
      c.lambda_t = 0.0;
      break;
    case Variant::dann:
      c.lambda_s = 0.0;
      c.lambda_t = 0.0;
      c.lambda_r = 0.0;
      break;
    case Variant::source_only:
      c.lambda_s = 0.0;
      c.lambda_t = 0.0;
      c.lambda_r = 0.0;
      c.lambda_d_scale = 0.0;
      break;
  }
  return c;
}

namespace {

void check_rows_are_distributions(const char* op, const Tensor& t) {
  if (t.rank() != 2) throw std::invalid_argument(std::string(op) + ": expected [N x K], got " + shape_string(t.shape()));
  const size_t n = t.dim(0), k = t.dim(1);
  const auto& d = t.data();
  for (size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (size_t j = 0; j < k; ++j) {
      if (d[i * k + j] < -1e-9) {
        throw std::invalid_argument(std::string(op) + ": negative entry in row " + std::to_string(i));
      }
      s += d[i * k + j];
    }
    if (std::fabs(s - 1.0) > 1e-6) {
      throw std::invalid_argument(std::string(op) + ": row " + std::to_string(i) + " sums to " + std::to_string(s));
    }
  }
}

// mean over rows of -sum_k target_k log p_k; target is constant.
Tensor soft_cross_entropy(const Tensor& probs, const Tensor& target) {
  const double inv_n = 1.0 / static_cast<double>(probs.dim(0));
  Tensor weighted = mul(target.detach(), log_op(probs));
  return mul_scalar(sum_all(weighted), -inv_n);
}

}  // namespace

Tensor loss_classification(const Tensor& probs, const Tensor& y_onehot) {
  check_rows_are_distributions("loss_classification", probs);
  check_rows_are_distributions("loss_classification", y_onehot);
  if (probs.shape() != y_onehot.shape()) {
    throw std::invalid_argument("loss_classification: shape mismatch " + shape_string(probs.shape()) + " vs " +
                                shape_string(y_onehot.shape()));
  }
  return soft_cross_entropy(probs, y_onehot);
}

Tensor loss_source_mixup(const Tensor& probs_mixed, const Tensor& y_mixed) {
  check_rows_are_distributions("loss_source_mixup", probs_mixed);
  check_rows_are_distributions("loss_source_mixup", y_mixed);
  if (probs_mixed.shape() != y_mixed.shape()) {
    throw std::invalid_argument("loss_source_mixup: shape mismatch " + shape_string(probs_mixed.shape()) + " vs " +
                                shape_string(y_mixed.shape()));
  }
  return soft_cross_entropy(probs_mixed, y_mixed);
}

Tensor loss_target_mixup(const Tensor& probs_mixed, const Tensor& pl_i, const Tensor& pl_j, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("loss_target_mixup: lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
  if (probs_mixed.shape() != pl_i.shape() || probs_mixed.shape() != pl_j.shape()) {
    throw std::invalid_argument("loss_target_mixup: shape mismatch between prediction and pseudo-labels");
  }
  const size_t n = probs_mixed.dim(0);
  // Mixed pseudo-label target, built as plain data from the detached inputs.
  std::vector<double> target(probs_mixed.numel());
  const auto& a = pl_i.data();
  const auto& b = pl_j.data();
  for (size_t i = 0; i < target.size(); ++i) target[i] = lambda * a[i] + (1.0 - lambda) * b[i];
  Tensor target_t(probs_mixed.shape(), std::move(target));
  const double inv_n = 1.0 / static_cast<double>(n);
  return mul_scalar(sum_all(abs_op(sub(probs_mixed, target_t))), inv_n);
}

namespace {

Tensor domain_log_score(const Tensor& d_s, const Tensor& d_t) {
  auto check = [](const char* which, const Tensor& t) {
    if (t.rank() != 2 || t.dim(1) != 1) {
      throw std::invalid_argument(std::string("loss_adversarial: ") + which + " must be [N x 1], got " +
                                  shape_string(t.shape()));
    }
  };
  check("d_s", d_s);
  check("d_t", d_t);
  Tensor ones = Tensor::full(d_t.shape(), 1.0);
  return add(mean_all(log_op(d_s)), mean_all(log_op(sub(ones, d_t))));
}

}  // namespace

Tensor loss_adversarial(const Tensor& d_s, const Tensor& d_t) { return domain_log_score(d_s, d_t); }

Tensor loss_adversarial_mixup(const Tensor& d_mixed_s, const Tensor& d_mixed_t) {
  return domain_log_score(d_mixed_s, d_mixed_t);
}

}  // namespace dmrl
