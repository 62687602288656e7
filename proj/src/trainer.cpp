#include "dmrl/trainer.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "dmrl/ops.hpp"

namespace dmrl {

double lr_schedule(double p, double eta0, double theta, double beta) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("lr_schedule: p must lie in [0, 1], got " + std::to_string(p));
  }
  return eta0 / std::pow(1.0 + theta * p, beta);
}

double lambda_d_schedule(double p, double delta) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("lambda_d_schedule: p must lie in [0, 1], got " + std::to_string(p));
  }
  const double e = std::exp(-delta * p);
  return (1.0 - e) / (1.0 + e);
}

void sgd_momentum_step(ModelParams& params, const std::vector<std::string>& names,
                       std::map<std::string, std::vector<double>>& buffers, double eta, double momentum,
                       Direction direction) {
  const double sign = direction == Direction::descend ? -1.0 : 1.0;
  for (const std::string& name : names) {
    Tensor& t = params.at(name);
    if (!t.has_grad()) throw std::logic_error("sgd_momentum_step: missing gradient for " + name);
    auto it = buffers.find(name);
    if (it == buffers.end()) throw std::logic_error("sgd_momentum_step: missing momentum buffer for " + name);
    std::vector<double>& buf = it->second;
    const std::vector<double>& g = t.grad();
    std::vector<double>& v = t.data();
    for (size_t i = 0; i < v.size(); ++i) {
      buf[i] = momentum * buf[i] + g[i];
      v[i] += sign * eta * buf[i];
    }
  }
}

Trainer::Trainer(const Architecture& arch, const HyperParams& hp, uint64_t seed)
    : arch_(arch),
      hp_(hp),
      seed_(seed),
      params_(build(arch, RngStream::mix(seed, seed_tag::init))),
      beta_(hp.alpha, RngStream::mix(seed, seed_tag::beta)),
      pairing_rng_(RngStream::mix(seed, seed_tag::pairing)) {
  hp_.validate();
  for (const auto& [name, t] : params_.values) {
    state_.momentum.emplace(name, std::vector<double>(t.numel(), 0.0));
  }
  names_gc_ = params_.names_with_prefix("G.");
  for (const std::string& n : params_.names_with_prefix("C.")) names_gc_.push_back(n);
  names_d_ = params_.names_with_prefix("D.");
}

LossBreakdown Trainer::train_iteration(const Tensor& x_source, const Tensor& y_source, const Tensor& x_target) {
  if (x_source.dim(0) != x_target.dim(0)) {
    throw std::invalid_argument("train_iteration: batch sizes differ, " + std::to_string(x_source.dim(0)) + " vs " +
                                std::to_string(x_target.dim(0)));
  }
  const size_t n = x_source.dim(0);
  const double p = state_.p();
  const double eta = lr_schedule(p, hp_.eta0, hp_.theta, hp_.beta_exp);
  const EffectiveCoeffs co = apply_variant(hp_);
  const double lambda_d = co.lambda_d_scale * lambda_d_schedule(p, hp_.delta);
  const double lambda = beta_.sample();  // one draw per iteration, shared by every mixup term

  const bool need_mixed_source = co.lambda_s > 0.0 || co.lambda_r > 0.0;
  const bool need_mixed_target = co.lambda_t > 0.0 || co.lambda_r > 0.0;
  std::vector<size_t> perm_s, perm_t;
  Tensor x_ms, y_ms, x_mt;
  if (need_mixed_source) {
    perm_s = random_permutation(n, pairing_rng_);
    x_ms = mix_inputs(x_source, perm_s, lambda);
    y_ms = mix_labels(y_source, perm_s, lambda);
  }
  if (need_mixed_target) {
    perm_t = random_permutation(n, pairing_rng_);
    x_mt = mix_inputs(x_target, perm_t, lambda);
  }

  LossBreakdown out;
  out.lambda_s = co.lambda_s;
  out.lambda_t = co.lambda_t;
  out.lambda_r = co.lambda_r;
  out.lambda_d = lambda_d;

  // Phase D: ascend the discriminator on l_D = lambda_d * L_adv +
  // lambda_r * L_adv_r. Skipped entirely when both coefficients are zero;
  // the objective would be constant and D must stay untouched.
  if (lambda_d > 0.0 || co.lambda_r > 0.0) {
    Tape tape;
    Tensor l_d;
    if (lambda_d > 0.0) {
      Tensor d_s = discriminate(params_, features(params_, x_source));
      Tensor d_t = discriminate(params_, features(params_, x_target));
      l_d = mul_scalar(loss_adversarial(d_s, d_t), lambda_d);
    }
    if (co.lambda_r > 0.0) {
      Tensor d_ms = discriminate(params_, features(params_, x_ms));
      Tensor d_mt = discriminate(params_, features(params_, x_mt));
      Tensor term = mul_scalar(loss_adversarial_mixup(d_ms, d_mt), co.lambda_r);
      l_d = l_d.defined() ? add(l_d, term) : term;
    }
    if (!std::isfinite(l_d.item())) {
      throw TrainingDiverged("non-finite discriminator objective at step " + std::to_string(state_.step));
    }
    tape.backward(l_d);
    sgd_momentum_step(params_, names_d_, state_.momentum, eta, hp_.momentum, Direction::ascend);
    params_.zero_grads();
  }
  if (phase_probe_) phase_probe_('d', params_);

  // Phase G,C: fresh forward of every batch kind against the updated D,
  // then descend G and C on the combined objective.
  {
    Tape tape;
    Tensor f_s = features(params_, x_source);
    Tensor probs_s = classify(params_, f_s);
    Tensor l_c = loss_classification(probs_s, y_source);
    out.l_c = l_c.item();
    Tensor total = l_c;
    Tensor f_ms, f_mt;
    if (co.lambda_s > 0.0) {
      f_ms = features(params_, x_ms);
      Tensor l_s_r = loss_source_mixup(classify(params_, f_ms), y_ms);
      out.l_s_r = l_s_r.item();
      total = add(total, mul_scalar(l_s_r, co.lambda_s));
    }
    if (co.lambda_t > 0.0) {
      Tensor pl_i, pl_j;
      {
        // Pseudo-labels are fixed targets; no gradient flows through them.
        NoGradGuard ng;
        pl_i = classify(params_, features(params_, x_target));
        pl_j = permute_rows(pl_i, perm_t);
      }
      f_mt = features(params_, x_mt);
      Tensor l_t_r = loss_target_mixup(classify(params_, f_mt), pl_i, pl_j, lambda);
      out.l_t_r = l_t_r.item();
      total = add(total, mul_scalar(l_t_r, co.lambda_t));
    }
    if (lambda_d > 0.0) {
      Tensor f_t = features(params_, x_target);
      Tensor l_adv = loss_adversarial(discriminate(params_, f_s), discriminate(params_, f_t));
      out.l_adv = l_adv.item();
      total = add(total, mul_scalar(l_adv, lambda_d));
    }
    if (co.lambda_r > 0.0) {
      if (!f_ms.defined()) f_ms = features(params_, x_ms);
      if (!f_mt.defined()) f_mt = features(params_, x_mt);
      Tensor l_adv_r = loss_adversarial_mixup(discriminate(params_, f_ms), discriminate(params_, f_mt));
      out.l_adv_r = l_adv_r.item();
      total = add(total, mul_scalar(l_adv_r, co.lambda_r));
    }
    out.total_gc = total.item();
    out.total_d = lambda_d * out.l_adv + co.lambda_r * out.l_adv_r;
    if (!out.finite()) {
      throw TrainingDiverged("non-finite loss at step " + std::to_string(state_.step) + ": " + out.describe());
    }
    tape.backward(total);
    sgd_momentum_step(params_, names_gc_, state_.momentum, eta, hp_.momentum, Direction::descend);
    params_.zero_grads();
  }
  if (phase_probe_) phase_probe_('g', params_);
  return out;
}

RunMetrics Trainer::train(const DomainDataset& source_train, const DomainDataset& target_train,
                          const DomainDataset& source_eval, const DomainDataset& target_eval,
                          const StepObserver& observer) {
  if (source_train.count() == 0 || target_train.count() == 0) {
    throw std::invalid_argument("train: empty training dataset");
  }
  if (!source_train.labeled()) throw std::invalid_argument("train: source train split must be labeled");
  if (target_train.labeled()) throw std::invalid_argument("train: target train split must be unlabeled");
  if (!source_eval.labeled() || !target_eval.labeled()) {
    throw std::invalid_argument("train: evaluation splits must be labeled");
  }

  const auto t_start = std::chrono::steady_clock::now();
  RunMetrics metrics;
  if (hp_.epochs == 0) return metrics;

  const size_t n = hp_.batch_size;
  const size_t pool = std::min(source_train.count(), target_train.count());
  const size_t iters = pool / n;
  if (iters == 0) {
    throw std::invalid_argument("train: batch size " + std::to_string(n) + " exceeds smaller domain size " +
                                std::to_string(pool));
  }
  state_.step = 0;
  state_.total_steps = hp_.epochs * iters;

  BatchPlan source_plan(source_train.count(), n, RngStream::mix(seed_, seed_tag::shuffle_source));
  BatchPlan target_plan(target_train.count(), n, RngStream::mix(seed_, seed_tag::shuffle_target));
  const size_t num_classes = params_.arch.num_classes;

  // The target stream reshuffles on its own cadence when its size differs
  // from the source's.
  size_t target_epoch = 0;
  size_t target_cursor = 0;
  std::vector<std::vector<size_t>> target_batches = target_plan.epoch(target_epoch);

  for (size_t epoch = 0; epoch < hp_.epochs; ++epoch) {
    const auto source_batches = source_plan.epoch(epoch);
    LossBreakdown sums;
    double last_p = 0.0, last_lambda_d = 0.0;
    for (size_t it = 0; it < iters; ++it) {
      if (target_cursor == target_batches.size()) {
        target_batches = target_plan.epoch(++target_epoch);
        target_cursor = 0;
      }
      Tensor xs = gather_images(source_train, source_batches[it]);
      Tensor ys = gather_onehot(source_train, source_batches[it], num_classes);
      Tensor xt = gather_images(target_train, target_batches[target_cursor++]);

      last_p = state_.p();
      const LossBreakdown lb = train_iteration(xs, ys, xt);
      if (observer) observer(state_.step, lb);
      ++state_.step;

      sums.l_c += lb.l_c;
      sums.l_s_r += lb.l_s_r;
      sums.l_t_r += lb.l_t_r;
      sums.l_adv += lb.l_adv;
      sums.l_adv_r += lb.l_adv_r;
      last_lambda_d = lb.lambda_d;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.p = last_p;
    rec.eta_p = lr_schedule(last_p, hp_.eta0, hp_.theta, hp_.beta_exp);
    rec.lambda_d = last_lambda_d;
    const double inv = 1.0 / static_cast<double>(iters);
    rec.l_c = sums.l_c * inv;
    rec.l_s_r = sums.l_s_r * inv;
    rec.l_t_r = sums.l_t_r * inv;
    rec.l_adv = sums.l_adv * inv;
    rec.l_adv_r = sums.l_adv_r * inv;
    rec.src_acc = evaluate_accuracy(params_, source_eval);
    rec.tgt_acc = evaluate_accuracy(params_, target_eval);
    metrics.epochs.push_back(rec);
    metrics.best_target_acc = std::max(metrics.best_target_acc, rec.tgt_acc);
  }
  metrics.final_target_acc = metrics.epochs.back().tgt_acc;
  metrics.final_source_acc = metrics.epochs.back().src_acc;
  metrics.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return metrics;
}

namespace {

std::vector<int> predict_labels(const ModelParams& params, const DomainDataset& ds) {
  constexpr size_t kChunk = 256;
  std::vector<int> pred(ds.count());
  std::vector<size_t> idx;
  for (size_t start = 0; start < ds.count(); start += kChunk) {
    const size_t stop = std::min(ds.count(), start + kChunk);
    idx.clear();
    for (size_t i = start; i < stop; ++i) idx.push_back(i);
    Tensor probs = classify(params, features(params, gather_images(ds, idx)));
    const size_t k = probs.dim(1);
    for (size_t i = 0; i < idx.size(); ++i) {
      const double* row = probs.data().data() + i * k;
      size_t best = 0;
      for (size_t j = 1; j < k; ++j) {
        if (row[j] > row[best]) best = j;
      }
      pred[start + i] = static_cast<int>(best);
    }
  }
  return pred;
}

}  // namespace

double evaluate_accuracy(const ModelParams& params, const DomainDataset& ds) {
  if (!ds.labeled()) throw std::invalid_argument("evaluate_accuracy: evaluation requires labels");
  const std::vector<int> pred = predict_labels(params, ds);
  size_t correct = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == ds.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

std::vector<double> evaluate_per_class(const ModelParams& params, const DomainDataset& ds) {
  if (!ds.labeled()) throw std::invalid_argument("evaluate_per_class: evaluation requires labels");
  const std::vector<int> pred = predict_labels(params, ds);
  const size_t k = std::max(ds.num_classes(), params.arch.num_classes);
  std::vector<double> correct(k, 0.0), total(k, 0.0);
  for (size_t i = 0; i < pred.size(); ++i) {
    const auto label = static_cast<size_t>(ds.labels[i]);
    total[label] += 1.0;
    if (pred[i] == ds.labels[i]) correct[label] += 1.0;
  }
  std::vector<double> acc(k, 0.0);
  for (size_t j = 0; j < k; ++j) acc[j] = total[j] > 0.0 ? correct[j] / total[j] : 0.0;
  return acc;
}

}  // namespace dmrl
