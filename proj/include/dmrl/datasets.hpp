#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmrl/tensor.hpp"

namespace dmrl {

enum class DomainTag { source, target };
enum class Split { train, eval };

// Immutable two-domain dataset. Images are [M x C x H x W] or [M x d] with
// values in [0, 1]. Labels are present for source train/eval and for eval
// splits of the target; the target train split is unlabeled.
struct DomainDataset {
  Tensor images;
  std::vector<int> labels;  // empty when unlabeled
  DomainTag domain = DomainTag::source;
  Split split = Split::train;

  size_t count() const { return images.defined() ? images.dim(0) : 0; }
  bool labeled() const { return !labels.empty(); }
  size_t num_classes() const;  // max label + 1
};

// Parametric two-domain shift: class means equally spaced on a circle with
// isotropic Gaussian noise; the target domain applies a global rotation and
// translation to the same generative process. Features are mapped into
// [0, 1]^2 and snapped to the 1/255 grid so IDX export round-trips exactly.
struct SynthSpec {
  size_t num_classes = 3;
  size_t per_class = 100;
  double radius = 1.0;
  double sigma = 0.3;
  double rotation_rad = 0.0;
  double translate_x = 0.0;
  double translate_y = 0.0;
  uint64_t seed = 0;

  void validate() const;
  // Half-width of the box mapped onto [0, 1]^2.
  double norm_halfwidth() const;
  // Raw-space mean of class k in the source domain.
  void class_mean(size_t k, double& x, double& y) const;
};

struct SynthPair {
  DomainDataset source;
  DomainDataset target;
};

// Deterministic given (spec, split). Train split: labeled source, unlabeled
// target. Eval split: both labeled, drawn independently of the train split.
SynthPair generate_synthetic(const SynthSpec& spec, Split split = Split::train);

// Same draws as generate_synthetic but the target keeps its labels; used
// for writing fixtures, where labels live in a separate file anyway.
SynthPair generate_synthetic_labeled(const SynthSpec& spec, Split split);

// Big-endian IDX: images magic 0x00000803 (unsigned byte, rank 3), labels
// magic 0x00000801 (unsigned byte, rank 1). Pixels are divided by 255.
DomainDataset load_idx(const std::string& images_path, const std::string& labels_path);
void write_idx(const DomainDataset& ds, const std::string& images_path, const std::string& labels_path);

// Lines of "label,p1,...,pHW". Pixel scale auto-detected (divided by 255
// when any value exceeds 1). 16x16 digits are nearest-neighbor upsampled to
// 28x28 so one network input shape serves both domains.
DomainDataset load_csv_digits(const std::string& path);

DomainDataset strip_labels(DomainDataset ds);
DomainDataset take_first(const DomainDataset& ds, size_t limit);  // limit == 0 keeps everything
DomainDataset retag(DomainDataset ds, DomainTag domain, Split split);

// One epoch = one shuffled pass with the final short batch dropped; the
// shuffle is deterministic per (seed, epoch).
class BatchPlan {
 public:
  BatchPlan(size_t count, size_t batch_size, uint64_t seed);
  size_t batches_per_epoch() const { return count_ / batch_size_; }
  std::vector<std::vector<size_t>> epoch(size_t epoch_index) const;

 private:
  size_t count_;
  size_t batch_size_;
  uint64_t seed_;
};

// Assembles batch tensors from dataset rows.
Tensor gather_images(const DomainDataset& ds, const std::vector<size_t>& indices);
Tensor gather_onehot(const DomainDataset& ds, const std::vector<size_t>& indices, size_t num_classes);

}  // namespace dmrl
