#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dmrl/tensor.hpp"

namespace dmrl {

enum class ArchKind { mlp, lenet_like };

ArchKind parse_arch_kind(const std::string& s);
std::string to_string(ArchKind k);

// Describes the three networks: feature extractor G, category classifier C
// and domain discriminator D. feature_dim is the output width of G and the
// input width of both C and D.
struct Architecture {
  ArchKind kind = ArchKind::mlp;

  // mlp: flat input of input_dim, two hidden relu layers of width `hidden`,
  // then a linear map to feature_dim.
  size_t input_dim = 2;
  size_t hidden = 64;

  // lenet_like: [C x H x W] images through conv(->20, 5x5), maxpool2, relu,
  // conv(->50, 5x5), maxpool2, relu, flatten, linear(->feature_dim), relu.
  size_t in_channels = 1;
  size_t in_h = 28;
  size_t in_w = 28;

  size_t feature_dim = 16;
  size_t num_classes = 2;

  // Discriminator: linear(feature_dim -> disc_hidden), relu, linear
  // (disc_hidden -> disc_hidden), relu, linear(disc_hidden -> 1), sigmoid.
  size_t disc_hidden = 64;

  // Test-only: identity activations in G and no softmax in C, which makes
  // the composed classifier h exactly linear.
  bool linear_probe = false;

  static Architecture make_mlp(size_t input_dim, size_t feature_dim, size_t num_classes, size_t hidden = 64,
                               size_t disc_hidden = 64);
  static Architecture make_lenet(size_t num_classes, size_t feature_dim = 500, size_t disc_hidden = 1024);

  size_t flat_input_dim() const;
  void validate() const;  // throws std::invalid_argument on inconsistent widths
};

// Named parameter collection for G, C and D. Names are stable across runs
// with the same architecture; every parameter requires gradients.
struct ModelParams {
  Architecture arch;
  std::map<std::string, Tensor> values;
  uint64_t init_seed = 0;

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  std::vector<std::string> names_with_prefix(const std::string& prefix) const;
  void zero_grads();
};

// Weights drawn uniformly from [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases
// zero; bit-deterministic given (arch, seed).
ModelParams build(const Architecture& arch, uint64_t seed);

// G(x). mlp flattens any [N x ...] input to [N x input_dim].
Tensor features(const ModelParams& params, const Tensor& x);

// C(f): class probabilities, rows sum to 1 (raw linear outputs when
// linear_probe is set).
Tensor classify(const ModelParams& params, const Tensor& f);

// D(f): per-sample source-domain probability, strictly inside (0, 1).
Tensor discriminate(const ModelParams& params, const Tensor& f);

// Flat binary checkpoint: magic "DMRL", version u32, then per parameter
// name length u32, name bytes, rank u32, extents u32 each, little-endian
// f64 payload. Records run until end of file.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

// Recovers the architecture from parameter names and shapes.
Architecture infer_architecture(const std::map<std::string, Tensor>& values);

// FNV-1a over parameter bytes in name order; for trajectory comparisons.
uint64_t param_hash(const ModelParams& params);

}  // namespace dmrl
