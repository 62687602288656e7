// Acceptance suite: one pass/fail line per criterion; exit 0 only when no
// criterion fails. Criterion 8 is skipped (not failed) when the digit data
// files are absent.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dmrl/gradcheck.hpp"
#include "dmrl/mixup.hpp"
#include "dmrl/models.hpp"
#include "dmrl/objectives.hpp"
#include "dmrl/ops.hpp"
#include "dmrl/run.hpp"
#include "dmrl/trainer.hpp"

namespace fs = std::filesystem;
using namespace dmrl;

namespace {

int g_failures = 0;

void report(const char* status, int criterion, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", status, criterion, detail.c_str());
  std::fflush(stdout);
}

void pass(int criterion, const std::string& detail) { report("PASS", criterion, detail); }

void fail(int criterion, const std::string& detail) {
  report("FAIL", criterion, detail);
  ++g_failures;
}

void check(bool ok, int criterion, const std::string& detail) {
  if (ok) {
    pass(criterion, detail);
  } else {
    fail(criterion, detail);
  }
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

// ---------------------------------------------------------------------------
// 1. Gradient oracle: the gradcheck command over three seeds, under 10 s.

void criterion_1() {
  const double t0 = now_seconds();
  bool all_ok = true;
  for (int seed : {0, 1, 2}) {
    const std::string cmd = std::string(DMRL_CLI_PATH) + " gradcheck --seed " + std::to_string(seed) + " > /dev/null";
    const int rc = std::system(cmd.c_str());
    all_ok = all_ok && rc == 0;
  }
  const double elapsed = now_seconds() - t0;
  check(all_ok && elapsed < 10.0, 1,
        fmt("gradcheck over seeds {0,1,2}: every loss term and both totals < 1e-4 (%.1f s)", elapsed));
}

// ---------------------------------------------------------------------------
// 2. DANN reduction: variant=dann is bit-identical to a standalone loop of
//    the baseline objective built from the same primitives, 100 iterations.

RunConfig dann_reduction_config() {
  RunConfig config;
  config.task = "synth";
  config.variant = "dann";
  config.seed = 0;
  config.epochs = 10;
  config.batch_size = 30;  // 300 samples -> 10 iterations per epoch
  return config;
}

ModelParams reference_dann_loop(const RunConfig& config) {
  const RunData data = load_run_data(config);
  const Architecture arch = config.architecture(data.input_dim, data.num_classes);
  const HyperParams hp = config.hyperparams();
  ModelParams params = build(arch, RngStream::mix(config.seed, seed_tag::init));

  std::map<std::string, std::vector<double>> buffers;
  for (const auto& [name, t] : params.values) buffers.emplace(name, std::vector<double>(t.numel(), 0.0));
  std::vector<std::string> names_gc = params.names_with_prefix("G.");
  for (const std::string& n : params.names_with_prefix("C.")) names_gc.push_back(n);
  const std::vector<std::string> names_d = params.names_with_prefix("D.");

  BatchPlan src_plan(data.source_train.count(), hp.batch_size, RngStream::mix(config.seed, seed_tag::shuffle_source));
  BatchPlan tgt_plan(data.target_train.count(), hp.batch_size, RngStream::mix(config.seed, seed_tag::shuffle_target));
  const size_t iters = std::min(data.source_train.count(), data.target_train.count()) / hp.batch_size;
  const size_t total = hp.epochs * iters;

  size_t step = 0;
  size_t tgt_epoch = 0, tgt_cursor = 0;
  auto tgt_batches = tgt_plan.epoch(0);
  for (size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    const auto src_batches = src_plan.epoch(epoch);
    for (size_t it = 0; it < iters; ++it) {
      if (tgt_cursor == tgt_batches.size()) {
        tgt_batches = tgt_plan.epoch(++tgt_epoch);
        tgt_cursor = 0;
      }
      Tensor xs = gather_images(data.source_train, src_batches[it]);
      Tensor ys = gather_onehot(data.source_train, src_batches[it], data.num_classes);
      Tensor xt = gather_images(data.target_train, tgt_batches[tgt_cursor++]);

      const double p = static_cast<double>(step) / static_cast<double>(total);
      const double eta = lr_schedule(p, hp.eta0, hp.theta, hp.beta_exp);
      const double lambda_d = lambda_d_schedule(p, hp.delta);

      if (lambda_d > 0.0) {
        Tape tape;
        Tensor d_s = discriminate(params, features(params, xs));
        Tensor d_t = discriminate(params, features(params, xt));
        Tensor l_d = mul_scalar(loss_adversarial(d_s, d_t), lambda_d);
        tape.backward(l_d);
        sgd_momentum_step(params, names_d, buffers, eta, hp.momentum, Direction::ascend);
        params.zero_grads();
      }
      {
        Tape tape;
        Tensor f_s = features(params, xs);
        Tensor probs = classify(params, f_s);
        Tensor total_loss = loss_classification(probs, ys);
        if (lambda_d > 0.0) {
          Tensor f_t = features(params, xt);
          Tensor l_adv = loss_adversarial(discriminate(params, f_s), discriminate(params, f_t));
          total_loss = add(total_loss, mul_scalar(l_adv, lambda_d));
        }
        tape.backward(total_loss);
        sgd_momentum_step(params, names_gc, buffers, eta, hp.momentum, Direction::descend);
        params.zero_grads();
      }
      ++step;
    }
  }
  return params;
}

void criterion_2() {
  const RunConfig config = dann_reduction_config();
  const RunResult trained = run_single(config);
  const ModelParams reference = reference_dann_loop(config);

  const fs::path dir = fs::temp_directory_path() / "dmrl_acceptance_c2";
  fs::create_directories(dir);
  const std::string a = (dir / "trainer.bin").string();
  const std::string b = (dir / "reference.bin").string();
  save_checkpoint(trained.params, a);
  save_checkpoint(reference, b);
  const uint64_t ha = param_hash(trained.params);
  const uint64_t hb = param_hash(reference);

  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  std::vector<char> bytes_a((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  std::vector<char> bytes_b((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  fs::remove_all(dir);

  check(ha == hb && bytes_a == bytes_b && !bytes_a.empty(), 2,
        fmt("variant=dann matches the standalone baseline loop over 100 iterations (checkpoint hash %016llx)",
            static_cast<unsigned long long>(ha)));
}

// ---------------------------------------------------------------------------
// 3. Mixup algebra: 10^4 randomized property checks in under 5 s.

void criterion_3() {
  const double t0 = now_seconds();
  RngStream rng(2024);
  size_t checks = 0;
  bool ok = true;
  std::string first_failure;

  auto expect = [&](bool cond, const char* what) {
    ++checks;
    if (!cond && ok) {
      ok = false;
      first_failure = what;
    }
  };

  // Endpoint identities: lambda = 1 returns x, lambda = 0 returns x[perm].
  for (int rep = 0; rep < 3000; ++rep) {
    const size_t n = 2 + rng.index(6), d = 1 + rng.index(5);
    std::vector<double> data(n * d);
    for (double& v : data) v = 2.0 * rng.uniform() - 1.0;
    Tensor x({n, d}, data);
    const std::vector<size_t> perm = random_permutation(n, rng);
    Tensor at_one = mix_inputs(x, perm, 1.0);
    Tensor at_zero = mix_inputs(x, perm, 0.0);
    bool same = true;
    for (size_t i = 0; i < n && same; ++i) {
      for (size_t j = 0; j < d && same; ++j) {
        same = at_one.data()[i * d + j] == x.data()[i * d + j] &&
               at_zero.data()[i * d + j] == x.data()[perm[i] * d + j];
      }
    }
    expect(same, "endpoint identity");
  }

  // Label rows stay normalized to 1e-12 and nonnegative.
  for (int rep = 0; rep < 3000; ++rep) {
    const size_t n = 2 + rng.index(6), k = 2 + rng.index(6);
    std::vector<double> soft(n * k);
    for (size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (size_t j = 0; j < k; ++j) {
        soft[i * k + j] = rng.uniform_open();
        s += soft[i * k + j];
      }
      for (size_t j = 0; j < k; ++j) soft[i * k + j] /= s;
    }
    Tensor y({n, k}, std::move(soft));
    Tensor mixed = mix_labels(y, random_permutation(n, rng), rng.uniform());
    bool good = true;
    for (size_t i = 0; i < n && good; ++i) {
      double s = 0.0;
      for (size_t j = 0; j < k; ++j) {
        good = good && mixed.data()[i * k + j] >= 0.0;
        s += mixed.data()[i * k + j];
      }
      good = good && std::fabs(s - 1.0) <= 1e-12;
    }
    expect(good, "label row normalization");
  }

  // One-hot pairs with distinct classes keep the first argmax at lambda > .5.
  for (int rep = 0; rep < 3000; ++rep) {
    const size_t k = 2 + rng.index(6);
    const size_t a = rng.index(k);
    size_t b = rng.index(k);
    while (b == a) b = rng.index(k);
    std::vector<double> rows(2 * k, 0.0);
    rows[a] = 1.0;
    rows[k + b] = 1.0;
    Tensor y({2, k}, std::move(rows));
    const double lambda = 0.5 + 0.5 * rng.uniform_open();
    Tensor mixed = mix_labels(y, {1, 0}, lambda);
    size_t argmax = 0;
    for (size_t j = 1; j < k; ++j) {
      if (mixed.data()[j] > mixed.data()[argmax]) argmax = j;
    }
    expect(argmax == a, "argmax preservation");
  }

  // Linear probe: the category mixup penalty vanishes for a linear head.
  for (int rep = 0; rep < 1000; ++rep) {
    Architecture arch = Architecture::make_mlp(2 + rng.index(3), 2 + rng.index(6), 2 + rng.index(4), 8, 8);
    arch.linear_probe = true;
    ModelParams params = build(arch, rng.next_u64());
    const size_t n = 4 + rng.index(4);
    std::vector<double> data(n * arch.input_dim);
    for (double& v : data) v = rng.uniform();
    Tensor xt({n, arch.input_dim}, std::move(data));
    const std::vector<size_t> perm = random_permutation(n, rng);
    const double lambda = rng.uniform();
    Tensor x_mixed = mix_inputs(xt, perm, lambda);
    Tensor pl_i = classify(params, features(params, xt));
    Tensor pl_j = permute_rows(pl_i, perm);
    const double loss = loss_target_mixup(classify(params, features(params, x_mixed)), pl_i, pl_j, lambda).item();
    expect(std::fabs(loss) <= 1e-9, "linear fixed point");
  }

  const double elapsed = now_seconds() - t0;
  check(ok && checks >= 10000 && elapsed < 5.0, 3,
        ok ? fmt("%zu randomized mixup property checks (%.2f s)", checks, elapsed)
           : fmt("property violated: %s", first_failure.c_str()));
}

// ---------------------------------------------------------------------------
// 4. Beta sampler moments at alpha = 0.2.

void criterion_4() {
  BetaSampler sampler(0.2, 424242);
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  bool in_range = true;
  for (int i = 0; i < n; ++i) {
    const double v = sampler.sample();
    in_range = in_range && v > 0.0 && v < 1.0;
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  const double expected_var = 0.04 / 0.224;  // a*b / ((a+b)^2 (a+b+1))
  const bool ok = in_range && std::fabs(mean - 0.5) < 0.01 && std::fabs(var - expected_var) < 0.005;
  check(ok, 4, fmt("1e5 draws at alpha=0.2: mean %.4f (|d|<0.01), var %.4f vs %.4f (|d|<0.005), all in (0,1)", mean,
                   var, expected_var));
}

// ---------------------------------------------------------------------------
// 5. Schedule arithmetic.

void criterion_5() {
  bool ok = lr_schedule(0.0) == 0.01;
  ok = ok && std::fabs(lr_schedule(1.0) - 0.01 / std::pow(11.0, 0.75)) <= 1e-9;
  ok = ok && std::fabs(lambda_d_schedule(0.5) - (1.0 - std::exp(-5.0)) / (1.0 + std::exp(-5.0))) <= 1e-9;
  double prev = -1.0;
  bool monotone = true;
  for (int i = 0; i <= 1000; ++i) {
    const double v = lambda_d_schedule(static_cast<double>(i) / 1000.0);
    monotone = monotone && v >= prev;
    prev = v;
  }
  check(ok && monotone, 5,
        fmt("lr(0)=%.2g exactly, lr(1)=%.7g, lambda_d(0.5)=%.6f, lambda_d monotone over 1001 grid points",
            lr_schedule(0.0), lr_schedule(1.0), lambda_d_schedule(0.5)));
}

// ---------------------------------------------------------------------------
// 6/7/9. Synthetic adaptation effect, ablation ordering, and the per-step
// objective decomposition, all on the same desk-scale task.

RunConfig synth_task_config() {
  RunConfig config;
  config.task = "synth";
  config.epochs = 30;
  config.batch_size = 32;
  config.synth_classes = 3;
  config.synth_per_class = 100;
  config.synth_eval_per_class = 200;
  config.synth_rotation_deg = 50.0;
  config.synth_sigma = 0.25;
  config.synth_translate_x = 0.25;
  config.synth_translate_y = 0.15;
  config.synth_seed = 0;
  // Desk-scale training constants: 270 iterations need a hotter, sharper
  // schedule than the full-scale defaults, a faster lambda_d ramp, a wider
  // discriminator, mid-range mixing and a tamer consistency weight.
  config.eta0 = 0.3;
  config.theta = 30.0;
  config.delta = 20.0;
  config.alpha = 1.0;
  config.lambda_t = 1.0;
  config.disc_hidden = 256;
  return config;
}

struct DecompositionStats {
  size_t steps = 0;
  double worst = 0.0;
};

double median_final_acc(const RunConfig& base, const std::string& variant, DecompositionStats* decomp) {
  std::vector<double> accs;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    RunConfig config = base;
    config.variant = variant;
    config.seed = seed;
    StepObserver observer;
    if (decomp) {
      observer = [decomp](size_t, const LossBreakdown& lb) {
        const double recomputed = lb.l_c + lb.lambda_s * lb.l_s_r + lb.lambda_t * lb.l_t_r +
                                  lb.lambda_d * lb.l_adv + lb.lambda_r * lb.l_adv_r;
        decomp->worst = std::max(decomp->worst, std::fabs(recomputed - lb.total_gc));
        ++decomp->steps;
      };
    }
    accs.push_back(run_single(config, observer).metrics.final_target_acc);
  }
  return median(accs);
}

void criteria_6_7_9() {
  const RunConfig base = synth_task_config();
  DecompositionStats decomp;

  const double t0 = now_seconds();
  const double acc_full = median_final_acc(base, "full", &decomp);
  const double acc_dann = median_final_acc(base, "dann", &decomp);
  const double acc_source = median_final_acc(base, "source_only", &decomp);
  const double elapsed6 = now_seconds() - t0;

  const bool order_ok = acc_full >= acc_dann && acc_dann >= acc_source;
  const bool gap_ok = (acc_full - acc_source) >= 0.10;
  check(order_ok && gap_ok && elapsed6 < 120.0, 6,
        fmt("median target accuracy full=%.3f >= dann=%.3f >= source_only=%.3f, gap %.1f points >= 10 (%.0f s)",
            acc_full, acc_dann, acc_source, 100.0 * (acc_full - acc_source), elapsed6));

  const double acc_no_dm = median_final_acc(base, "no_dm", &decomp);
  const double acc_no_cm = median_final_acc(base, "no_cm", &decomp);
  const double acc_no_lcm = median_final_acc(base, "no_lcm", &decomp);
  const double acc_no_ucm = median_final_acc(base, "no_ucm", &decomp);
  const bool ablation_ok = acc_full >= acc_no_dm && acc_full >= acc_no_cm && acc_full + 0.01 >= acc_no_lcm &&
                           acc_full >= acc_no_ucm;
  check(ablation_ok, 7,
        fmt("full %.3f >= no_dm %.3f, no_cm %.3f, no_lcm %.3f (1pt tolerance), no_ucm %.3f", acc_full, acc_no_dm,
            acc_no_cm, acc_no_lcm, acc_no_ucm));

  check(decomp.steps > 0 && decomp.worst <= 1e-12, 9,
        fmt("objective decomposition holds at every logged step: %zu steps, worst |dev| %.2e <= 1e-12", decomp.steps,
            decomp.worst));
}

// ---------------------------------------------------------------------------
// 8. Reduced MNIST->USPS, only when the data files are present.

void criterion_8() {
  const char* root_env = std::getenv("DMRL_DATA_DIR");
  const fs::path root = root_env ? fs::path(root_env) : fs::path("data");
  const fs::path mnist_images = root / "train-images-idx3-ubyte";
  const fs::path mnist_labels = root / "train-labels-idx1-ubyte";
  const fs::path usps = root / "usps.csv";
  if (!fs::exists(mnist_images) || !fs::exists(mnist_labels) || !fs::exists(usps)) {
    report("SKIP", 8, "reduced MNIST->USPS needs " + mnist_images.string() + ", " + mnist_labels.string() + " and " +
                          usps.string());
    return;
  }

  const double t0 = now_seconds();
  RunConfig config;
  config.task = "digits";
  config.arch = "lenet_like";
  config.epochs = 10;
  config.batch_size = 32;
  config.lambda_t = 2.0;
  config.source_images = mnist_images.string();
  config.source_labels = mnist_labels.string();
  config.source_limit = 5000;
  config.target_images = usps.string();
  config.target_eval_images = usps.string();
  config.seed = 0;

  config.variant = "full";
  const double acc_full = run_single(config).metrics.final_target_acc;
  config.variant = "source_only";
  const double acc_source = run_single(config).metrics.final_target_acc;
  const double elapsed = now_seconds() - t0;

  check(acc_full >= acc_source + 0.05 && acc_full >= 0.75 && elapsed < 900.0, 8,
        fmt("reduced MNIST->USPS: full %.3f vs source_only %.3f (>= 5 points, full >= 0.75; %.0f s)", acc_full,
            acc_source, elapsed));
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criteria_6_7_9();
  criterion_8();
  if (g_failures == 0) {
    std::printf("acceptance: all criteria passed\n");
    return 0;
  }
  std::printf("acceptance: %d criterion(s) failed\n", g_failures);
  return 1;
}
