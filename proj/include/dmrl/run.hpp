#pragma once

#include <string>

#include "dmrl/config.hpp"
#include "dmrl/datasets.hpp"
#include "dmrl/trainer.hpp"

namespace dmrl {

// Materialized datasets for one run.
struct RunData {
  DomainDataset source_train;
  DomainDataset target_train;
  DomainDataset source_eval;
  DomainDataset target_eval;
  size_t num_classes = 0;
  size_t input_dim = 0;  // flat width for mlp inputs
};

// Builds the four splits the trainer consumes. synth: generated from the
// config's spec with the run seed folded in. digits: loaded from IDX or CSV
// files, target train labels dropped, limits applied.
RunData load_run_data(const RunConfig& config);

SynthSpec synth_spec_from(const RunConfig& config, size_t per_class);

// Resolves a data path against DMRL_DATA_DIR when relative.
std::string resolve_data_path(const std::string& path);

struct RunResult {
  ModelParams params;
  RunMetrics metrics;
};

// One full training run from a resolved config.
RunResult run_single(const RunConfig& config, const StepObserver& observer = {});

// metrics.csv, summary.json, checkpoint.bin and the echoed resolved config,
// all under config.out_dir.
void write_run_outputs(const RunConfig& config, const RunResult& result);

}  // namespace dmrl
