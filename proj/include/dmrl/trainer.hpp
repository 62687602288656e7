#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dmrl/datasets.hpp"
#include "dmrl/mixup.hpp"
#include "dmrl/models.hpp"
#include "dmrl/objectives.hpp"

namespace dmrl {

// eta_p = eta0 / (1 + theta * p)^beta, p in [0, 1].
double lr_schedule(double p, double eta0 = 0.01, double theta = 10.0, double beta = 0.75);

// (1 - exp(-delta * p)) / (1 + exp(-delta * p)), ramping from 0 toward 1.
double lambda_d_schedule(double p, double delta = 10.0);

enum class Direction { ascend, descend };

// buffer <- momentum * buffer + grad; param <- param -/+ eta * buffer.
// Every named parameter must have an accumulated gradient.
void sgd_momentum_step(ModelParams& params, const std::vector<std::string>& names,
                       std::map<std::string, std::vector<double>>& buffers, double eta, double momentum,
                       Direction direction);

// Thrown when any loss component stops being finite.
struct TrainingDiverged : std::runtime_error {
  explicit TrainingDiverged(const std::string& what) : std::runtime_error(what) {}
};

struct EpochRecord {
  size_t epoch = 0;
  double p = 0.0;        // progress at the last iteration of the epoch
  double eta_p = 0.0;
  double lambda_d = 0.0;
  double l_c = 0.0;      // loss fields are means over the epoch's iterations
  double l_s_r = 0.0;
  double l_t_r = 0.0;
  double l_adv = 0.0;
  double l_adv_r = 0.0;
  double src_acc = 0.0;
  double tgt_acc = 0.0;
};

struct RunMetrics {
  std::vector<EpochRecord> epochs;
  double final_target_acc = 0.0;
  double best_target_acc = 0.0;
  double final_source_acc = 0.0;
  double wall_seconds = 0.0;
};

struct TrainState {
  size_t step = 0;
  size_t total_steps = 0;
  double p() const { return total_steps == 0 ? 0.0 : static_cast<double>(step) / static_cast<double>(total_steps); }
  std::map<std::string, std::vector<double>> momentum;
};

// Stream tags hanging off the run seed; exposed so reference loops can
// reproduce the trainer's draws exactly.
namespace seed_tag {
inline constexpr uint64_t init = 1;
inline constexpr uint64_t shuffle_source = 2;
inline constexpr uint64_t shuffle_target = 3;
inline constexpr uint64_t beta = 4;
inline constexpr uint64_t pairing = 5;
}  // namespace seed_tag

using StepObserver = std::function<void(size_t step, const LossBreakdown&)>;
using PhaseProbe = std::function<void(char phase, const ModelParams&)>;  // 'd' then 'g'

// Owns the model, momentum buffers and RNG streams of one run. One training
// iteration draws a single mixing coefficient, builds within-domain mixed
// batches, ascends D on the adversarial terms, then descends G and C on the
// combined objective; both phases run their own forward pass.
class Trainer {
 public:
  Trainer(const Architecture& arch, const HyperParams& hp, uint64_t seed);

  LossBreakdown train_iteration(const Tensor& x_source, const Tensor& y_source, const Tensor& x_target);

  RunMetrics train(const DomainDataset& source_train, const DomainDataset& target_train,
                   const DomainDataset& source_eval, const DomainDataset& target_eval,
                   const StepObserver& observer = {});

  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }
  TrainState& state() { return state_; }
  const HyperParams& hyperparams() const { return hp_; }

  // Test hook: called after each phase of train_iteration.
  void set_phase_probe(PhaseProbe probe) { phase_probe_ = std::move(probe); }

 private:
  Architecture arch_;
  HyperParams hp_;
  uint64_t seed_;
  ModelParams params_;
  TrainState state_;
  BetaSampler beta_;
  RngStream pairing_rng_;
  std::vector<std::string> names_gc_;
  std::vector<std::string> names_d_;
  PhaseProbe phase_probe_;
};

// Argmax accuracy of the classifier on a labeled dataset, evaluated in
// chunks with gradients off.
double evaluate_accuracy(const ModelParams& params, const DomainDataset& ds);

// Per-class accuracy; entry k is the accuracy over samples labeled k.
std::vector<double> evaluate_per_class(const ModelParams& params, const DomainDataset& ds);

}  // namespace dmrl
