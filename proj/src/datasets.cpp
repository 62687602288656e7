#include "dmrl/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "dmrl/rng.hpp"

namespace dmrl {

size_t DomainDataset::num_classes() const {
  int m = -1;
  for (int l : labels) m = std::max(m, l);
  return static_cast<size_t>(m + 1);
}

void SynthSpec::validate() const {
  if (num_classes < 2) throw std::invalid_argument("synth: num_classes must be >= 2");
  if (per_class == 0) throw std::invalid_argument("synth: per_class must be positive");
  if (!(radius > 0.0)) throw std::invalid_argument("synth: radius must be positive");
  if (!(sigma > 0.0)) throw std::invalid_argument("synth: sigma must be positive");
}

double SynthSpec::norm_halfwidth() const {
  return radius + 4.0 * sigma + std::max(std::fabs(translate_x), std::fabs(translate_y));
}

void SynthSpec::class_mean(size_t k, double& x, double& y) const {
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(num_classes);
  x = radius * std::cos(angle);
  y = radius * std::sin(angle);
}

namespace {

// Snap a normalized coordinate to the byte grid exactly as the IDX loader
// reconstructs it.
double quantize01(double v) {
  v = std::clamp(v, 0.0, 1.0);
  const int byte = static_cast<int>(std::lround(v * 255.0));
  return static_cast<double>(byte) / 255.0;
}

DomainDataset synth_domain(const SynthSpec& spec, DomainTag domain, Split split) {
  const uint64_t tag = (domain == DomainTag::source ? 0x5 : 0xA) + (split == Split::train ? 0 : 0x100);
  RngStream rng(RngStream::mix(spec.seed, tag));
  const size_t m = spec.num_classes * spec.per_class;
  const double half = spec.norm_halfwidth();
  const double cos_r = std::cos(spec.rotation_rad);
  const double sin_r = std::sin(spec.rotation_rad);

  std::vector<double> data(m * 2);
  std::vector<int> labels(m);
  size_t row = 0;
  for (size_t k = 0; k < spec.num_classes; ++k) {
    double mx, my;
    spec.class_mean(k, mx, my);
    for (size_t i = 0; i < spec.per_class; ++i, ++row) {
      double x = mx + spec.sigma * rng.normal();
      double y = my + spec.sigma * rng.normal();
      if (domain == DomainTag::target) {
        const double rx = cos_r * x - sin_r * y;
        const double ry = sin_r * x + cos_r * y;
        x = rx + spec.translate_x;
        y = ry + spec.translate_y;
      }
      data[row * 2 + 0] = quantize01((x + half) / (2.0 * half));
      data[row * 2 + 1] = quantize01((y + half) / (2.0 * half));
      labels[row] = static_cast<int>(k);
    }
  }
  DomainDataset ds;
  ds.images = Tensor({m, 2}, std::move(data));
  ds.labels = std::move(labels);
  ds.domain = domain;
  ds.split = split;
  return ds;
}

}  // namespace

SynthPair generate_synthetic(const SynthSpec& spec, Split split) {
  SynthPair pair = generate_synthetic_labeled(spec, split);
  if (split == Split::train) pair.target.labels.clear();  // unlabeled by contract
  return pair;
}

SynthPair generate_synthetic_labeled(const SynthSpec& spec, Split split) {
  spec.validate();
  SynthPair pair;
  pair.source = synth_domain(spec, DomainTag::source, split);
  pair.target = synth_domain(spec, DomainTag::target, split);
  return pair;
}

namespace {

constexpr uint32_t kIdxImagesMagic = 0x00000803;
constexpr uint32_t kIdxLabelsMagic = 0x00000801;

uint32_t read_be32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("idx: truncated header in " + path);
  return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) | uint32_t(b[3]);
}

void write_be32(std::ostream& os, uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::string hex32(uint32_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s = "0x";
  for (int shift = 28; shift >= 0; shift -= 4) s += digits[(v >> shift) & 0xf];
  return s;
}

}  // namespace

DomainDataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("idx: cannot open " + images_path);
  const uint32_t img_magic = read_be32(img, images_path);
  if (img_magic != kIdxImagesMagic) {
    throw std::runtime_error("idx: bad image magic " + hex32(img_magic) + " in " + images_path + ", expected " +
                             hex32(kIdxImagesMagic));
  }
  const uint32_t m = read_be32(img, images_path);
  const uint32_t h = read_be32(img, images_path);
  const uint32_t w = read_be32(img, images_path);
  if (m == 0 || h == 0 || w == 0) throw std::runtime_error("idx: empty dimensions in " + images_path);
  std::vector<unsigned char> pixels(static_cast<size_t>(m) * h * w);
  img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!img) throw std::runtime_error("idx: truncated pixel data in " + images_path);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("idx: cannot open " + labels_path);
  const uint32_t lab_magic = read_be32(lab, labels_path);
  if (lab_magic != kIdxLabelsMagic) {
    throw std::runtime_error("idx: bad label magic " + hex32(lab_magic) + " in " + labels_path + ", expected " +
                             hex32(kIdxLabelsMagic));
  }
  const uint32_t lm = read_be32(lab, labels_path);
  if (lm != m) {
    throw std::runtime_error("idx: image count " + std::to_string(m) + " does not match label count " +
                             std::to_string(lm));
  }
  std::vector<unsigned char> raw_labels(lm);
  lab.read(reinterpret_cast<char*>(raw_labels.data()), static_cast<std::streamsize>(raw_labels.size()));
  if (!lab) throw std::runtime_error("idx: truncated label data in " + labels_path);

  std::vector<double> data(pixels.size());
  for (size_t i = 0; i < pixels.size(); ++i) data[i] = static_cast<double>(pixels[i]) / 255.0;

  DomainDataset ds;
  // Vector fixtures are stored as H=1 rows; reload them as [M x d].
  if (h == 1) {
    ds.images = Tensor({m, w}, std::move(data));
  } else {
    ds.images = Tensor({m, 1, h, w}, std::move(data));
  }
  ds.labels.assign(raw_labels.begin(), raw_labels.end());
  return ds;
}

void write_idx(const DomainDataset& ds, const std::string& images_path, const std::string& labels_path) {
  size_t m, h, w;
  if (ds.images.rank() == 2) {
    m = ds.images.dim(0);
    h = 1;
    w = ds.images.dim(1);
  } else if (ds.images.rank() == 4 && ds.images.dim(1) == 1) {
    m = ds.images.dim(0);
    h = ds.images.dim(2);
    w = ds.images.dim(3);
  } else {
    throw std::invalid_argument("idx: cannot write images of shape " + shape_string(ds.images.shape()));
  }
  if (!ds.labeled()) throw std::invalid_argument("idx: refusing to write a dataset without labels");
  if (ds.labels.size() != m) throw std::invalid_argument("idx: label count does not match image count");

  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("idx: cannot open " + images_path + " for writing");
  write_be32(img, kIdxImagesMagic);
  write_be32(img, static_cast<uint32_t>(m));
  write_be32(img, static_cast<uint32_t>(h));
  write_be32(img, static_cast<uint32_t>(w));
  const auto& values = ds.images.data();
  std::vector<unsigned char> pixels(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    if (values[i] < 0.0 || values[i] > 1.0) throw std::invalid_argument("idx: pixel value outside [0, 1]");
    pixels[i] = static_cast<unsigned char>(std::lround(values[i] * 255.0));
  }
  img.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!img) throw std::runtime_error("idx: write failed for " + images_path);

  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("idx: cannot open " + labels_path + " for writing");
  write_be32(lab, kIdxLabelsMagic);
  write_be32(lab, static_cast<uint32_t>(m));
  std::vector<unsigned char> raw(ds.labels.size());
  for (size_t i = 0; i < raw.size(); ++i) {
    if (ds.labels[i] < 0 || ds.labels[i] > 255) throw std::invalid_argument("idx: label outside byte range");
    raw[i] = static_cast<unsigned char>(ds.labels[i]);
  }
  lab.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!lab) throw std::runtime_error("idx: write failed for " + labels_path);
}

namespace {

std::vector<double> upsample_nn(const std::vector<double>& in, size_t src, size_t dst) {
  std::vector<double> out(dst * dst);
  for (size_t i = 0; i < dst; ++i) {
    const size_t si = i * src / dst;
    for (size_t j = 0; j < dst; ++j) {
      const size_t sj = j * src / dst;
      out[i * dst + j] = in[si * src + sj];
    }
  }
  return out;
}

}  // namespace

DomainDataset load_csv_digits(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  size_t line_no = 0;
  size_t width = 0;
  double max_value = 0.0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool first = true;
    int label = -1;
    while (std::getline(ss, cell, ',')) {
      try {
        if (first) {
          label = std::stoi(cell);
          first = false;
        } else {
          row.push_back(std::stod(cell));
        }
      } catch (const std::exception&) {
        throw std::runtime_error("csv: line " + std::to_string(line_no) + ": cannot parse '" + cell + "'");
      }
    }
    if (first) throw std::runtime_error("csv: line " + std::to_string(line_no) + ": empty record");
    if (label < 0) throw std::runtime_error("csv: line " + std::to_string(line_no) + ": negative label");
    if (width == 0) {
      width = row.size();
      const size_t side = static_cast<size_t>(std::llround(std::sqrt(static_cast<double>(width))));
      if (width == 0 || side * side != width) {
        throw std::runtime_error("csv: line " + std::to_string(line_no) + ": " + std::to_string(width) +
                                 " pixels is not a square image");
      }
    } else if (row.size() != width) {
      throw std::runtime_error("csv: line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                               " pixels, got " + std::to_string(row.size()));
    }
    for (double v : row) max_value = std::max(max_value, v);
    rows.push_back(std::move(row));
    labels.push_back(label);
  }
  if (rows.empty()) throw std::runtime_error("csv: no records in " + path);

  const size_t side = static_cast<size_t>(std::llround(std::sqrt(static_cast<double>(width))));
  const double scale = max_value > 1.0 ? 1.0 / 255.0 : 1.0;
  const size_t out_side = side == 16 ? 28 : side;

  std::vector<double> data(rows.size() * out_side * out_side);
  for (size_t r = 0; r < rows.size(); ++r) {
    std::vector<double>& row = rows[r];
    for (double& v : row) v = std::clamp(v * scale, 0.0, 1.0);
    const std::vector<double> img = (out_side == side) ? std::move(row) : upsample_nn(row, side, out_side);
    std::memcpy(data.data() + r * out_side * out_side, img.data(), out_side * out_side * sizeof(double));
  }
  DomainDataset ds;
  ds.images = Tensor({rows.size(), 1, out_side, out_side}, std::move(data));
  ds.labels = std::move(labels);
  return ds;
}

DomainDataset strip_labels(DomainDataset ds) {
  ds.labels.clear();
  return ds;
}

DomainDataset take_first(const DomainDataset& ds, size_t limit) {
  if (limit == 0 || limit >= ds.count()) return ds;
  const size_t row = ds.images.numel() / ds.count();
  std::vector<double> data(ds.images.data().begin(),
                           ds.images.data().begin() + static_cast<std::ptrdiff_t>(limit * row));
  std::vector<size_t> shape = ds.images.shape();
  shape[0] = limit;
  DomainDataset out;
  out.images = Tensor(std::move(shape), std::move(data));
  if (ds.labeled()) out.labels.assign(ds.labels.begin(), ds.labels.begin() + static_cast<std::ptrdiff_t>(limit));
  out.domain = ds.domain;
  out.split = ds.split;
  return out;
}

DomainDataset retag(DomainDataset ds, DomainTag domain, Split split) {
  ds.domain = domain;
  ds.split = split;
  return ds;
}

BatchPlan::BatchPlan(size_t count, size_t batch_size, uint64_t seed)
    : count_(count), batch_size_(batch_size), seed_(seed) {
  if (batch_size == 0) throw std::invalid_argument("batches: batch size must be positive");
  if (batch_size > count) {
    throw std::invalid_argument("batches: batch size " + std::to_string(batch_size) + " exceeds dataset size " +
                                std::to_string(count));
  }
}

std::vector<std::vector<size_t>> BatchPlan::epoch(size_t epoch_index) const {
  RngStream rng(RngStream::mix(seed_, epoch_index));
  std::vector<size_t> order = random_permutation(count_, rng);
  std::vector<std::vector<size_t>> batches;
  const size_t n_batches = count_ / batch_size_;
  batches.reserve(n_batches);
  for (size_t b = 0; b < n_batches; ++b) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b * batch_size_),
                         order.begin() + static_cast<std::ptrdiff_t>((b + 1) * batch_size_));
  }
  return batches;
}

Tensor gather_images(const DomainDataset& ds, const std::vector<size_t>& indices) {
  const size_t row = ds.images.numel() / ds.count();
  std::vector<double> data(indices.size() * row);
  const auto& src = ds.images.data();
  for (size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= ds.count()) throw std::out_of_range("gather_images: index out of range");
    std::memcpy(data.data() + i * row, src.data() + indices[i] * row, row * sizeof(double));
  }
  std::vector<size_t> shape = ds.images.shape();
  shape[0] = indices.size();
  return Tensor(std::move(shape), std::move(data));
}

Tensor gather_onehot(const DomainDataset& ds, const std::vector<size_t>& indices, size_t num_classes) {
  if (!ds.labeled()) throw std::logic_error("gather_onehot: dataset has no labels");
  std::vector<double> data(indices.size() * num_classes, 0.0);
  for (size_t i = 0; i < indices.size(); ++i) {
    const int label = ds.labels.at(indices[i]);
    if (label < 0 || static_cast<size_t>(label) >= num_classes) {
      throw std::out_of_range("gather_onehot: label " + std::to_string(label) + " outside [0, " +
                              std::to_string(num_classes) + ")");
    }
    data[i * num_classes + static_cast<size_t>(label)] = 1.0;
  }
  return Tensor({indices.size(), num_classes}, std::move(data));
}

}  // namespace dmrl
