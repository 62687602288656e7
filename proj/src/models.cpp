#include "dmrl/models.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "dmrl/ops.hpp"
#include "dmrl/rng.hpp"

namespace dmrl {

ArchKind parse_arch_kind(const std::string& s) {
  if (s == "mlp") return ArchKind::mlp;
  if (s == "lenet_like") return ArchKind::lenet_like;
  throw std::invalid_argument("unknown arch kind: " + s);
}

std::string to_string(ArchKind k) { return k == ArchKind::mlp ? "mlp" : "lenet_like"; }

Architecture Architecture::make_mlp(size_t input_dim, size_t feature_dim, size_t num_classes, size_t hidden,
                                    size_t disc_hidden) {
  Architecture a;
  a.kind = ArchKind::mlp;
  a.input_dim = input_dim;
  a.feature_dim = feature_dim;
  a.num_classes = num_classes;
  a.hidden = hidden;
  a.disc_hidden = disc_hidden;
  a.validate();
  return a;
}

Architecture Architecture::make_lenet(size_t num_classes, size_t feature_dim, size_t disc_hidden) {
  Architecture a;
  a.kind = ArchKind::lenet_like;
  a.in_channels = 1;
  a.in_h = 28;
  a.in_w = 28;
  a.feature_dim = feature_dim;
  a.num_classes = num_classes;
  a.disc_hidden = disc_hidden;
  a.validate();
  return a;
}

size_t Architecture::flat_input_dim() const {
  return kind == ArchKind::mlp ? input_dim : in_channels * in_h * in_w;
}

namespace {

// Spatial extent after the two conv/pool stages of the lenet-like G.
size_t lenet_pooled(size_t extent) {
  if (extent < 5) throw std::invalid_argument("lenet_like: input extent too small for 5x5 conv");
  size_t e = (extent - 4) / 2;  // conv1 + pool
  if (e < 5) throw std::invalid_argument("lenet_like: input extent too small for second 5x5 conv");
  return (e - 4) / 2;  // conv2 + pool
}

}  // namespace

void Architecture::validate() const {
  if (num_classes < 2) throw std::invalid_argument("architecture: num_classes must be >= 2");
  if (feature_dim == 0) throw std::invalid_argument("architecture: feature_dim must be positive");
  if (disc_hidden == 0) throw std::invalid_argument("architecture: disc_hidden must be positive");
  if (kind == ArchKind::mlp) {
    if (input_dim == 0 || hidden == 0) throw std::invalid_argument("architecture: mlp widths must be positive");
  } else {
    if (in_channels == 0) throw std::invalid_argument("architecture: in_channels must be positive");
    if (lenet_pooled(in_h) == 0 || lenet_pooled(in_w) == 0) {
      throw std::invalid_argument("architecture: lenet_like input too small");
    }
    if (linear_probe) throw std::invalid_argument("architecture: linear_probe is only supported for mlp");
  }
}

Tensor& ModelParams::at(const std::string& name) {
  auto it = values.find(name);
  if (it == values.end()) throw std::out_of_range("ModelParams: no parameter named " + name);
  return it->second;
}

const Tensor& ModelParams::at(const std::string& name) const {
  auto it = values.find(name);
  if (it == values.end()) throw std::out_of_range("ModelParams: no parameter named " + name);
  return it->second;
}

std::vector<std::string> ModelParams::names_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [name, t] : values) {
    if (name.rfind(prefix, 0) == 0) out.push_back(name);
  }
  return out;
}

void ModelParams::zero_grads() {
  for (auto& [name, t] : values) t.zero_grad();
}

namespace {

Tensor init_weight(std::vector<size_t> shape, size_t fan_in, RngStream& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = (2.0 * rng.uniform() - 1.0) * bound;
  return Tensor(std::move(shape), std::move(data), /*requires_grad=*/true);
}

Tensor init_bias(size_t n) { return Tensor::zeros({n}, /*requires_grad=*/true); }

}  // namespace

ModelParams build(const Architecture& arch, uint64_t seed) {
  arch.validate();
  ModelParams params;
  params.arch = arch;
  params.init_seed = seed;
  RngStream rng(seed);

  // Creation order is fixed; the map only provides name-sorted access.
  if (arch.kind == ArchKind::mlp) {
    params.values.emplace("G.fc1.w", init_weight({arch.input_dim, arch.hidden}, arch.input_dim, rng));
    params.values.emplace("G.fc1.b", init_bias(arch.hidden));
    params.values.emplace("G.fc2.w", init_weight({arch.hidden, arch.hidden}, arch.hidden, rng));
    params.values.emplace("G.fc2.b", init_bias(arch.hidden));
    params.values.emplace("G.fc3.w", init_weight({arch.hidden, arch.feature_dim}, arch.hidden, rng));
    params.values.emplace("G.fc3.b", init_bias(arch.feature_dim));
  } else {
    const size_t ph = lenet_pooled(arch.in_h), pw = lenet_pooled(arch.in_w);
    const size_t flat = 50 * ph * pw;
    params.values.emplace("G.conv1.w", init_weight({20, arch.in_channels, 5, 5}, arch.in_channels * 25, rng));
    params.values.emplace("G.conv1.b", init_bias(20));
    params.values.emplace("G.conv2.w", init_weight({50, 20, 5, 5}, 20 * 25, rng));
    params.values.emplace("G.conv2.b", init_bias(50));
    params.values.emplace("G.fc1.w", init_weight({flat, arch.feature_dim}, flat, rng));
    params.values.emplace("G.fc1.b", init_bias(arch.feature_dim));
  }
  params.values.emplace("C.out.w", init_weight({arch.feature_dim, arch.num_classes}, arch.feature_dim, rng));
  params.values.emplace("C.out.b", init_bias(arch.num_classes));
  params.values.emplace("D.fc1.w", init_weight({arch.feature_dim, arch.disc_hidden}, arch.feature_dim, rng));
  params.values.emplace("D.fc1.b", init_bias(arch.disc_hidden));
  params.values.emplace("D.fc2.w", init_weight({arch.disc_hidden, arch.disc_hidden}, arch.disc_hidden, rng));
  params.values.emplace("D.fc2.b", init_bias(arch.disc_hidden));
  params.values.emplace("D.fc3.w", init_weight({arch.disc_hidden, 1}, arch.disc_hidden, rng));
  params.values.emplace("D.fc3.b", init_bias(1));
  return params;
}

Tensor features(const ModelParams& params, const Tensor& x) {
  const Architecture& arch = params.arch;
  if (x.rank() < 2) throw std::invalid_argument("features: expected a batched input, got " + shape_string(x.shape()));
  const size_t n = x.dim(0);
  if (arch.kind == ArchKind::mlp) {
    if (x.numel() / n != arch.input_dim) {
      throw std::invalid_argument("features: input " + shape_string(x.shape()) + " does not flatten to width " +
                                  std::to_string(arch.input_dim));
    }
    Tensor h = x.rank() == 2 ? x : reshape(x, {n, arch.input_dim});
    h = linear(h, params.at("G.fc1.w"), params.at("G.fc1.b"));
    if (!arch.linear_probe) h = relu(h);
    h = linear(h, params.at("G.fc2.w"), params.at("G.fc2.b"));
    if (!arch.linear_probe) h = relu(h);
    return linear(h, params.at("G.fc3.w"), params.at("G.fc3.b"));
  }
  if (x.rank() != 4 || x.dim(1) != arch.in_channels || x.dim(2) != arch.in_h || x.dim(3) != arch.in_w) {
    throw std::invalid_argument("features: input " + shape_string(x.shape()) + " does not match lenet_like input");
  }
  Tensor h = relu(maxpool2(conv2d(x, params.at("G.conv1.w"), params.at("G.conv1.b"))));
  h = relu(maxpool2(conv2d(h, params.at("G.conv2.w"), params.at("G.conv2.b"))));
  h = reshape(h, {n, h.numel() / n});
  return relu(linear(h, params.at("G.fc1.w"), params.at("G.fc1.b")));
}

Tensor classify(const ModelParams& params, const Tensor& f) {
  if (f.rank() != 2 || f.dim(1) != params.arch.feature_dim) {
    throw std::invalid_argument("classify: features " + shape_string(f.shape()) + " do not match feature_dim " +
                                std::to_string(params.arch.feature_dim));
  }
  Tensor z = linear(f, params.at("C.out.w"), params.at("C.out.b"));
  return params.arch.linear_probe ? z : softmax(z);
}

Tensor discriminate(const ModelParams& params, const Tensor& f) {
  if (f.rank() != 2 || f.dim(1) != params.arch.feature_dim) {
    throw std::invalid_argument("discriminate: features " + shape_string(f.shape()) + " do not match feature_dim " +
                                std::to_string(params.arch.feature_dim));
  }
  Tensor h = relu(linear(f, params.at("D.fc1.w"), params.at("D.fc1.b")));
  h = relu(linear(h, params.at("D.fc2.w"), params.at("D.fc2.b")));
  Tensor d = sigmoid(linear(h, params.at("D.fc3.w"), params.at("D.fc3.b")));
  return clamp(d, kLogClampEps, 1.0 - kLogClampEps);
}

namespace {

constexpr char kMagic[4] = {'D', 'M', 'R', 'L'};
constexpr uint32_t kVersion = 1;

constexpr uint32_t bswap32(uint32_t v) {
  return (v << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

constexpr uint64_t bswap64(uint64_t v) {
  return (static_cast<uint64_t>(bswap32(static_cast<uint32_t>(v))) << 32) | bswap32(static_cast<uint32_t>(v >> 32));
}

void write_u32(std::ostream& os, uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) v = bswap32(v);
  os.write(reinterpret_cast<const char*>(&v), 4);
}

uint32_t read_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  if constexpr (std::endian::native == std::endian::big) v = bswap32(v);
  return v;
}

void write_f64s(std::ostream& os, const std::vector<double>& vs) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(vs.data()), static_cast<std::streamsize>(vs.size() * 8));
  } else {
    for (double d : vs) {
      uint64_t bits;
      std::memcpy(&bits, &d, 8);
      bits = bswap64(bits);
      os.write(reinterpret_cast<const char*>(&bits), 8);
    }
  }
}

void read_f64s(std::istream& is, std::vector<double>& vs) {
  if constexpr (std::endian::native == std::endian::little) {
    is.read(reinterpret_cast<char*>(vs.data()), static_cast<std::streamsize>(vs.size() * 8));
    if (!is) throw std::runtime_error("checkpoint: truncated payload");
  } else {
    for (double& d : vs) {
      uint64_t bits = 0;
      is.read(reinterpret_cast<char*>(&bits), 8);
      if (!is) throw std::runtime_error("checkpoint: truncated payload");
      bits = bswap64(bits);
      std::memcpy(&d, &bits, 8);
    }
  }
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  os.write(kMagic, 4);
  write_u32(os, kVersion);
  for (const auto& [name, t] : params.values) {
    write_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<uint32_t>(t.rank()));
    for (size_t d : t.shape()) write_u32(os, static_cast<uint32_t>(d));
    write_f64s(os, t.data());
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  const uint32_t version = read_u32(is);
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  std::map<std::string, Tensor> values;
  for (;;) {
    uint32_t name_len = 0;
    is.read(reinterpret_cast<char*>(&name_len), 4);
    if (is.eof()) break;
    if (!is) throw std::runtime_error("checkpoint: truncated record header");
    if constexpr (std::endian::native == std::endian::big) name_len = bswap32(name_len);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw std::runtime_error("checkpoint: truncated name");
    const uint32_t rank = read_u32(is);
    std::vector<size_t> shape(rank);
    for (uint32_t i = 0; i < rank; ++i) shape[i] = read_u32(is);
    std::vector<double> data(shape_numel(shape));
    read_f64s(is, data);
    values.emplace(std::move(name), Tensor(std::move(shape), std::move(data), /*requires_grad=*/true));
  }
  ModelParams params;
  params.arch = infer_architecture(values);
  params.values = std::move(values);
  return params;
}

Architecture infer_architecture(const std::map<std::string, Tensor>& values) {
  auto need = [&](const std::string& name) -> const Tensor& {
    auto it = values.find(name);
    if (it == values.end()) throw std::runtime_error("checkpoint: missing parameter " + name);
    return it->second;
  };
  Architecture arch;
  arch.feature_dim = need("C.out.w").dim(0);
  arch.num_classes = need("C.out.w").dim(1);
  arch.disc_hidden = need("D.fc1.w").dim(1);
  if (values.count("G.conv1.w")) {
    arch.kind = ArchKind::lenet_like;
    arch.in_channels = need("G.conv1.w").dim(1);
    const size_t flat = need("G.fc1.w").dim(0);
    const size_t pooled = static_cast<size_t>(std::llround(std::sqrt(static_cast<double>(flat / 50))));
    if (50 * pooled * pooled != flat) {
      throw std::runtime_error("checkpoint: cannot infer lenet_like input extent from G.fc1.w");
    }
    arch.in_h = arch.in_w = 4 * pooled + 12;
  } else {
    arch.kind = ArchKind::mlp;
    arch.input_dim = need("G.fc1.w").dim(0);
    arch.hidden = need("G.fc1.w").dim(1);
  }
  arch.validate();
  return arch;
}

uint64_t param_hash(const ModelParams& params) {
  uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const void* p, size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& [name, t] : params.values) {
    feed(name.data(), name.size());
    feed(t.data().data(), t.data().size() * sizeof(double));
  }
  return h;
}

}  // namespace dmrl
