#pragma once

#include <cstdint>
#include <string>

#include "dmrl/tensor.hpp"

namespace dmrl {

// Which regularization terms a run keeps active. Coefficients removed by a
// variant are forced to zero; see apply_variant.
enum class Variant { full, no_dm, no_cm, no_lcm, no_ucm, dann, source_only };

Variant parse_variant(const std::string& s);
std::string to_string(Variant v);

// Scalar knobs and schedule constants of a training run.
struct HyperParams {
  double alpha = 0.2;        // Beta(alpha, alpha) for the mixing coefficient
  double lambda_s = 1e-4;    // labeled category mixup weight
  double lambda_t = 2.0;     // unlabeled category mixup weight
  double lambda_r = 1e-5;    // domain mixup weight
  double eta0 = 0.01;        // learning-rate schedule base
  double theta = 10.0;       // learning-rate schedule slope
  double beta_exp = 0.75;    // learning-rate schedule exponent
  double momentum = 0.9;
  double delta = 10.0;       // lambda_d ramp sharpness
  size_t batch_size = 32;
  size_t epochs = 10;
  Variant variant = Variant::full;

  void validate() const;  // throws std::invalid_argument
};

// Per-iteration record of every term of the combined objective, the
// coefficients in force, and the two phase totals:
//   total_gc = l_c + lambda_s*l_s_r + lambda_t*l_t_r
//            + lambda_d*l_adv + lambda_r*l_adv_r   (descended by G, C)
//   total_d  = lambda_d*l_adv + lambda_r*l_adv_r   (ascended by D)
// Terms whose coefficient is zero are skipped and reported as 0.
struct LossBreakdown {
  double l_c = 0.0;
  double l_s_r = 0.0;
  double l_t_r = 0.0;
  double l_adv = 0.0;
  double l_adv_r = 0.0;
  double total_gc = 0.0;
  double total_d = 0.0;
  double lambda_s = 0.0;
  double lambda_t = 0.0;
  double lambda_r = 0.0;
  double lambda_d = 0.0;

  bool finite() const;
  std::string describe() const;
};

// Coefficients after the variant mask. lambda_d_scale multiplies the
// scheduled lambda_d (1 normally, 0 for source_only).
struct EffectiveCoeffs {
  double lambda_s = 0.0;
  double lambda_t = 0.0;
  double lambda_r = 0.0;
  double lambda_d_scale = 1.0;
};

EffectiveCoeffs apply_variant(const HyperParams& hp);

// Mean over the batch of -sum_k y_k log p_k; y rows are one-hot labels.
Tensor loss_classification(const Tensor& probs, const Tensor& y_onehot);

// Same cross-entropy with soft targets from label mixing.
Tensor loss_source_mixup(const Tensor& probs_mixed, const Tensor& y_mixed);

// Mean over the batch of the L1 distance between the prediction on the
// mixed batch and the mixed pseudo-labels. pl_i and pl_j are treated as
// constants; pass them detached. Rows are not validated as distributions:
// the linear-probe configuration feeds raw linear outputs through here.
Tensor loss_target_mixup(const Tensor& probs_mixed, const Tensor& pl_i, const Tensor& pl_j, double lambda);

// mean(log d_s) + mean(log(1 - d_t)), entries clamped into (0, 1) upstream.
// D ascends this value; G descends it.
Tensor loss_adversarial(const Tensor& d_s, const Tensor& d_t);

// Same form on within-domain mixed samples; mixed source keeps domain
// label 1 and mixed target keeps domain label 0.
Tensor loss_adversarial_mixup(const Tensor& d_mixed_s, const Tensor& d_mixed_t);

}  // namespace dmrl
