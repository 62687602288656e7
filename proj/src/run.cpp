#include "dmrl/run.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "dmrl/rng.hpp"
#include "json.hpp"

namespace dmrl {

namespace {

constexpr uint64_t kSynthSeedTag = 0xDA7A;

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

DomainDataset load_digit_file(const std::string& images, const std::string& labels) {
  if (ends_with(images, ".csv")) return load_csv_digits(resolve_data_path(images));
  if (labels.empty()) throw ConfigError("config: IDX images '" + images + "' need a matching labels path");
  return load_idx(resolve_data_path(images), resolve_data_path(labels));
}

}  // namespace

std::string resolve_data_path(const std::string& path) {
  if (path.empty() || std::filesystem::path(path).is_absolute()) return path;
  if (const char* root = std::getenv("DMRL_DATA_DIR")) {
    return (std::filesystem::path(root) / path).string();
  }
  return path;
}

SynthSpec synth_spec_from(const RunConfig& config, size_t per_class) {
  SynthSpec spec;
  spec.num_classes = config.synth_classes;
  spec.per_class = per_class;
  spec.radius = config.synth_radius;
  spec.sigma = config.synth_sigma;
  spec.rotation_rad = config.synth_rotation_deg * std::numbers::pi / 180.0;
  spec.translate_x = config.synth_translate_x;
  spec.translate_y = config.synth_translate_y;
  spec.seed = RngStream::mix(config.synth_seed, kSynthSeedTag);
  return spec;
}

RunData load_run_data(const RunConfig& config) {
  RunData data;
  if (config.task == "synth") {
    const SynthSpec train_spec = synth_spec_from(config, config.synth_per_class);
    const SynthSpec eval_spec = synth_spec_from(config, config.synth_eval_per_class);
    SynthPair train = generate_synthetic(train_spec, Split::train);
    SynthPair eval = generate_synthetic(eval_spec, Split::eval);
    data.source_train = std::move(train.source);
    data.target_train = std::move(train.target);
    data.source_eval = std::move(eval.source);
    data.target_eval = std::move(eval.target);
    data.num_classes = config.synth_classes;
    data.input_dim = 2;
    return data;
  }

  data.source_train = retag(take_first(load_digit_file(config.source_images, config.source_labels),
                                       config.source_limit),
                            DomainTag::source, Split::train);
  data.target_train = retag(strip_labels(take_first(load_digit_file(config.target_images, config.target_labels),
                                                    config.target_limit)),
                            DomainTag::target, Split::train);
  if (config.source_eval_images.empty()) {
    // Default source eval split: the (limited) source train set.
    data.source_eval = retag(data.source_train, DomainTag::source, Split::eval);
  } else {
    data.source_eval =
        retag(load_digit_file(config.source_eval_images, config.source_eval_labels), DomainTag::source, Split::eval);
  }
  data.target_eval =
      retag(load_digit_file(config.target_eval_images, config.target_eval_labels), DomainTag::target, Split::eval);

  size_t num_classes = std::max(data.source_train.num_classes(), data.target_eval.num_classes());
  num_classes = std::max(num_classes, data.source_eval.num_classes());
  data.num_classes = num_classes;
  data.input_dim = data.source_train.images.numel() / data.source_train.count();
  return data;
}

RunResult run_single(const RunConfig& config, const StepObserver& observer) {
  config.validate();
  const RunData data = load_run_data(config);
  const Architecture arch = config.architecture(data.input_dim, data.num_classes);
  Trainer trainer(arch, config.hyperparams(), config.seed);
  RunResult result;
  result.metrics = trainer.train(data.source_train, data.target_train, data.source_eval, data.target_eval, observer);
  result.params = trainer.params();
  return result;
}

namespace {

void write_metrics_csv(const RunMetrics& metrics, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "# dmrl-metrics-v1\n";
  os << "epoch,p,eta_p,lambda_d,l_c,l_s_r,l_t_r,l_adv,l_adv_r,src_acc,tgt_acc\n";
  char buf[512];
  for (const EpochRecord& r : metrics.epochs) {
    std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", r.epoch, r.p,
                  r.eta_p, r.lambda_d, r.l_c, r.l_s_r, r.l_t_r, r.l_adv, r.l_adv_r, r.src_acc, r.tgt_acc);
    os << buf;
  }
}

}  // namespace

void write_run_outputs(const RunConfig& config, const RunResult& result) {
  const std::filesystem::path out(config.out_dir);
  std::filesystem::create_directories(out);

  write_config(config, (out / "config.resolved").string());
  write_metrics_csv(result.metrics, (out / "metrics.csv").string());
  save_checkpoint(result.params, (out / "checkpoint.bin").string());

  nlohmann::json summary;
  nlohmann::json cfg;
  for (const auto& [key, value] : config.items()) cfg[key] = value;
  summary["config"] = cfg;
  summary["variant"] = config.variant;
  summary["epochs_completed"] = result.metrics.epochs.size();
  summary["final_target_acc"] = result.metrics.final_target_acc;
  summary["best_target_acc"] = result.metrics.best_target_acc;
  summary["final_source_acc"] = result.metrics.final_source_acc;
  summary["wall_seconds"] = result.metrics.wall_seconds;
  std::ofstream os(out / "summary.json");
  if (!os) throw std::runtime_error("cannot write summary.json");
  os << summary.dump(2) << "\n";
}

}  // namespace dmrl
