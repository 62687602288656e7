#include <cmath>

#include "doctest.h"
#include "dmrl/gradcheck.hpp"
#include "dmrl/mixup.hpp"
#include "dmrl/models.hpp"
#include "dmrl/objectives.hpp"
#include "dmrl/ops.hpp"
#include "dmrl/rng.hpp"

using namespace dmrl;

namespace {

Tensor uniform_rows(size_t n, size_t k) { return Tensor::full({n, k}, 1.0 / static_cast<double>(k)); }

Tensor onehot_rows(size_t n, size_t k, size_t hot) {
  Tensor t = Tensor::zeros({n, k});
  for (size_t i = 0; i < n; ++i) t.data()[i * k + hot] = 1.0;
  return t;
}

Tensor random_distribution_rows(size_t n, size_t k, RngStream& rng) {
  std::vector<double> data(n * k);
  for (size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (size_t j = 0; j < k; ++j) {
      data[i * k + j] = rng.uniform_open();
      s += data[i * k + j];
    }
    for (size_t j = 0; j < k; ++j) data[i * k + j] /= s;
  }
  return Tensor({n, k}, std::move(data));
}

double entropy(const Tensor& dist) {
  double h = 0.0;
  for (double v : dist.data()) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h / static_cast<double>(dist.dim(0));
}

}  // namespace

TEST_CASE("classification loss closed forms") {
  CHECK(loss_classification(uniform_rows(4, 10), onehot_rows(4, 10, 3)).item() ==
        doctest::Approx(std::log(10.0)).epsilon(1e-12));
  CHECK(loss_classification(onehot_rows(3, 5, 2), onehot_rows(3, 5, 2)).item() == doctest::Approx(0.0));
  // Confidently wrong prediction hits the log clamp.
  const double loss = loss_classification(onehot_rows(1, 2, 1), onehot_rows(1, 2, 0)).item();
  CHECK(loss == doctest::Approx(-std::log(1e-12)));
  CHECK(std::isfinite(loss));
}

TEST_CASE("classification loss validates its inputs") {
  CHECK_THROWS_AS(loss_classification(uniform_rows(2, 3), uniform_rows(2, 4)), std::invalid_argument);
  Tensor bad({1, 2}, {0.9, 0.3});
  CHECK_THROWS_AS(loss_classification(bad, onehot_rows(1, 2, 0)), std::invalid_argument);
}

TEST_CASE("source mixup loss closed forms") {
  CHECK(loss_source_mixup(uniform_rows(5, 2), uniform_rows(5, 2)).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // lambda = 1 makes the mixed labels one-hot again.
  Tensor y = onehot_rows(4, 3, 1);
  Tensor mixed = mix_labels(y, {2, 3, 0, 1}, 1.0);
  RngStream rng(2);
  Tensor p = random_distribution_rows(4, 3, rng);
  CHECK(loss_source_mixup(p, mixed).item() == doctest::Approx(loss_classification(p, y).item()));
}

TEST_CASE("cross entropy against itself is the entropy, and is the minimum") {
  RngStream rng(3);
  Tensor q = random_distribution_rows(6, 4, rng);
  const double self_loss = loss_source_mixup(q, q).item();
  CHECK(self_loss == doctest::Approx(entropy(q)).epsilon(1e-9));
  for (int rep = 0; rep < 25; ++rep) {
    Tensor p = random_distribution_rows(6, 4, rng);
    CHECK(loss_source_mixup(p, q).item() >= self_loss - 1e-12);
  }
}

TEST_CASE("target mixup loss fixed point and extremes") {
  RngStream rng(5);
  Tensor pl_i = random_distribution_rows(4, 3, rng);
  Tensor pl_j = random_distribution_rows(4, 3, rng);
  const double lambda = 0.25;
  std::vector<double> mixed(pl_i.numel());
  for (size_t i = 0; i < mixed.size(); ++i) mixed[i] = lambda * pl_i.data()[i] + (1 - lambda) * pl_j.data()[i];
  Tensor prediction({4, 3}, mixed);
  CHECK(loss_target_mixup(prediction, pl_i, pl_j, lambda).item() == doctest::Approx(0.0));

  Tensor e0({1, 2}, {1, 0});
  Tensor e1({1, 2}, {0, 1});
  CHECK(loss_target_mixup(e0, e1, e1, 0.5).item() == doctest::Approx(2.0));
}

TEST_CASE("target mixup loss is bounded by the L1 diameter of the simplex") {
  RngStream rng(6);
  for (int rep = 0; rep < 100; ++rep) {
    Tensor p = random_distribution_rows(5, 4, rng);
    Tensor pl_i = random_distribution_rows(5, 4, rng);
    Tensor pl_j = random_distribution_rows(5, 4, rng);
    const double v = loss_target_mixup(p, pl_i, pl_j, rng.uniform()).item();
    CHECK(v >= 0.0);
    CHECK(v <= 2.0 + 1e-12);
  }
  CHECK_THROWS_AS(loss_target_mixup(uniform_rows(2, 2), uniform_rows(2, 2), uniform_rows(2, 2), 1.4),
                  std::invalid_argument);
}

TEST_CASE("adversarial loss closed forms and limits") {
  Tensor half_s = Tensor::full({4, 1}, 0.5);
  Tensor half_t = Tensor::full({4, 1}, 0.5);
  CHECK(loss_adversarial(half_s, half_t).item() == doctest::Approx(2.0 * std::log(0.5)).epsilon(1e-12));

  // D's optimum direction: confident and correct on both domains.
  Tensor good_s = Tensor::full({4, 1}, 1.0 - 1e-9);
  Tensor good_t = Tensor::full({4, 1}, 1e-9);
  const double near_zero = loss_adversarial(good_s, good_t).item();
  CHECK(near_zero < 0.0);
  CHECK(near_zero > -1e-6);

  // The fooled extreme approaches 2 log(eps).
  Tensor bad_s = Tensor::full({4, 1}, 1e-12);
  Tensor bad_t = Tensor::full({4, 1}, 1.0 - 1e-13);
  const double fooled = loss_adversarial(bad_s, bad_t).item();
  CHECK(fooled == doctest::Approx(2.0 * std::log(1e-12)).epsilon(1e-3));
  CHECK(std::isfinite(fooled));
}

TEST_CASE("adversarial mixup loss mirrors the unmixed form") {
  Tensor half = Tensor::full({3, 1}, 0.5);
  CHECK(loss_adversarial_mixup(half, half).item() == doctest::Approx(2.0 * std::log(0.5)));

  // lambda = 1: the mixed batch equals the original batch.
  RngStream rng(9);
  ModelParams params = build(Architecture::make_mlp(2, 4, 2, 8, 8), 3);
  std::vector<double> data(6 * 2);
  for (double& v : data) v = rng.uniform();
  Tensor xs({6, 2}, data);
  Tensor xt({6, 2}, std::vector<double>(data.rbegin(), data.rend()));
  Tensor x_ms = mix_inputs(xs, {3, 4, 5, 0, 1, 2}, 1.0);
  Tensor x_mt = mix_inputs(xt, {5, 4, 3, 2, 1, 0}, 1.0);
  const double mixed = loss_adversarial_mixup(discriminate(params, features(params, x_ms)),
                                              discriminate(params, features(params, x_mt))).item();
  const double plain = loss_adversarial(discriminate(params, features(params, xs)),
                                        discriminate(params, features(params, xt))).item();
  CHECK(mixed == doctest::Approx(plain));
}

TEST_CASE("variant masks zero exactly the advertised coefficients") {
  HyperParams hp;
  hp.lambda_s = 0.5;
  hp.lambda_t = 2.0;
  hp.lambda_r = 0.25;

  hp.variant = Variant::full;
  EffectiveCoeffs c = apply_variant(hp);
  CHECK(c.lambda_s == 0.5);
  CHECK(c.lambda_t == 2.0);
  CHECK(c.lambda_r == 0.25);
  CHECK(c.lambda_d_scale == 1.0);

  hp.variant = Variant::no_dm;
  c = apply_variant(hp);
  CHECK(c.lambda_r == 0.0);
  CHECK(c.lambda_s == 0.5);

  hp.variant = Variant::no_cm;
  c = apply_variant(hp);
  CHECK(c.lambda_s == 0.0);
  CHECK(c.lambda_t == 0.0);
  CHECK(c.lambda_r == 0.25);

  hp.variant = Variant::no_lcm;
  c = apply_variant(hp);
  CHECK(c.lambda_s == 0.0);
  CHECK(c.lambda_t == 2.0);

  hp.variant = Variant::no_ucm;
  c = apply_variant(hp);
  CHECK(c.lambda_t == 0.0);
  CHECK(c.lambda_s == 0.5);

  hp.variant = Variant::dann;
  c = apply_variant(hp);
  CHECK(c.lambda_s == 0.0);
  CHECK(c.lambda_t == 0.0);
  CHECK(c.lambda_r == 0.0);
  CHECK(c.lambda_d_scale == 1.0);

  hp.variant = Variant::source_only;
  c = apply_variant(hp);
  CHECK(c.lambda_d_scale == 0.0);

  CHECK_THROWS_AS(parse_variant("no_such_variant"), std::invalid_argument);
}

TEST_CASE("hyperparameter validation rejects bad knobs") {
  HyperParams hp;
  hp.alpha = 0.0;
  CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
  hp = HyperParams{};
  hp.lambda_t = -1.0;
  CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
  hp = HyperParams{};
  hp.momentum = 1.0;
  CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
  hp = HyperParams{};
  hp.batch_size = 0;
  CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
}

TEST_CASE("the discriminator objective has zero gradient on classifier weights") {
  ModelParams params = build(Architecture::make_mlp(2, 4, 3, 8, 8), 17);
  RngStream rng(21);
  std::vector<double> data(8 * 2);
  for (double& v : data) v = rng.uniform();
  Tensor xs({8, 2}, data);
  for (double& v : data) v = rng.uniform();
  Tensor xt({8, 2}, data);

  Tape tape;
  Tensor l_adv = loss_adversarial(discriminate(params, features(params, xs)),
                                  discriminate(params, features(params, xt)));
  Tensor total_d = mul_scalar(l_adv, 0.7);
  tape.backward(total_d);
  for (const std::string& name : params.names_with_prefix("C.")) {
    CAPTURE(name);
    CHECK_FALSE(params.at(name).has_grad());
  }
  // G and D do receive gradients from the same objective.
  CHECK(params.at("D.fc1.w").has_grad());
  CHECK(params.at("G.fc1.w").has_grad());
}

TEST_CASE("the full objective passes finite differences on a 2-input toy net") {
  Architecture arch = Architecture::make_mlp(2, 4, 3, 6, 6);
  ModelParams params = build(arch, 9);
  RngStream jitter(91);
  for (auto& [name, t] : params.values) {
    for (double& v : t.data()) v += 0.4 * (2.0 * jitter.uniform() - 1.0);
  }

  RngStream data_rng(92);
  auto batch = [&](size_t n) {
    std::vector<double> v(n * 2);
    for (double& x : v) x = data_rng.uniform();
    return Tensor({n, 2}, std::move(v));
  };
  const size_t n = 4;
  Tensor xs = batch(n), xt = batch(n);
  std::vector<double> onehot(n * 3, 0.0);
  for (size_t i = 0; i < n; ++i) onehot[i * 3 + data_rng.index(3)] = 1.0;
  Tensor ys({n, 3}, std::move(onehot));

  BetaSampler beta(0.2, 93);
  const double lambda = beta.sample();
  RngStream perm_rng(94);
  const auto perm_s = random_permutation(n, perm_rng);
  const auto perm_t = random_permutation(n, perm_rng);
  Tensor x_ms = mix_inputs(xs, perm_s, lambda);
  Tensor y_ms = mix_labels(ys, perm_s, lambda);
  Tensor x_mt = mix_inputs(xt, perm_t, lambda);
  Tensor pl_i = random_distribution_rows(n, 3, data_rng);
  Tensor pl_j = permute_rows(pl_i, perm_t);

  const double lambda_s = 0.05, lambda_t = 2.0, lambda_r = 0.02, lambda_d = 0.95;
  auto full_loss = [&] {
    Tensor total = loss_classification(classify(params, features(params, xs)), ys);
    total = add(total, mul_scalar(loss_source_mixup(classify(params, features(params, x_ms)), y_ms), lambda_s));
    total = add(total,
                mul_scalar(loss_target_mixup(classify(params, features(params, x_mt)), pl_i, pl_j, lambda), lambda_t));
    total = add(total, mul_scalar(loss_adversarial(discriminate(params, features(params, xs)),
                                                   discriminate(params, features(params, xt))),
                                  lambda_d));
    total = add(total, mul_scalar(loss_adversarial_mixup(discriminate(params, features(params, x_ms)),
                                                         discriminate(params, features(params, x_mt))),
                                  lambda_r));
    return total;
  };
  GradCheckResult res = finite_diff_check(full_loss, params, 1e-5);
  CHECK_MESSAGE(res.max_rel_error < 1e-4, res.describe());
}
