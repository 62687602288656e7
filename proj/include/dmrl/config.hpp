#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dmrl/models.hpp"
#include "dmrl/objectives.hpp"

namespace dmrl {

// Raised for malformed or unknown configuration; the CLI maps it to exit
// code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Flat key=value run configuration. A config file holds one pair per line
// with '#' comment lines; command-line flags override file values. Unknown
// keys are fatal: a silently defaulted typo would corrupt comparisons.
struct RunConfig {
  std::string task = "synth";  // synth | digits
  std::string arch = "mlp";    // mlp | lenet_like
  std::string variant = "full";
  uint64_t seed = 0;
  size_t epochs = 10;
  size_t batch_size = 32;

  double alpha = 0.2;
  double lambda_s = 1e-4;
  double lambda_t = 2.0;
  double lambda_r = 1e-5;
  double eta0 = 0.01;
  double theta = 10.0;
  double beta_exp = 0.75;
  double momentum = 0.9;
  double delta = 10.0;

  size_t feature_dim = 0;  // 0 = architecture default (16 mlp, 500 lenet_like)
  size_t hidden = 64;
  size_t disc_hidden = 0;  // 0 = architecture default (64 mlp, 1024 lenet_like)

  std::string out_dir = "runs/out";

  // synth task; the dataset seed is independent of the run seed so that
  // different training seeds (and ablation variants) see the same draw.
  uint64_t synth_seed = 0;
  size_t synth_classes = 3;
  size_t synth_per_class = 100;
  size_t synth_eval_per_class = 200;
  double synth_radius = 1.0;
  double synth_sigma = 0.25;
  double synth_rotation_deg = 50.0;
  double synth_translate_x = 0.25;
  double synth_translate_y = 0.15;

  // digits task; .csv paths use the text loader, everything else IDX.
  // Paths are resolved against DMRL_DATA_DIR when relative.
  std::string source_images, source_labels;
  std::string target_images, target_labels;
  std::string source_eval_images, source_eval_labels;
  std::string target_eval_images, target_eval_labels;
  size_t source_limit = 0;  // 0 = all
  size_t target_limit = 0;

  void apply(const std::string& key, const std::string& value);  // throws ConfigError
  void validate() const;

  HyperParams hyperparams() const;
  Architecture architecture(size_t input_dim, size_t num_classes) const;

  // Every key in a fixed order, for echoing the resolved config.
  std::vector<std::pair<std::string, std::string>> items() const;
};

RunConfig parse_config_file(const std::string& path);
void apply_config_file(RunConfig& config, const std::string& path);
void write_config(const RunConfig& config, const std::string& path);

}  // namespace dmrl
