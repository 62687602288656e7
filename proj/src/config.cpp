#include "dmrl/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace dmrl {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size() || !std::isfinite(v)) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' has non-numeric value '" + value + "'");
  }
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' has non-integer value '" + value + "'");
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
  if (key == "task") task = value;
  else if (key == "arch") arch = value;
  else if (key == "variant") variant = value;
  else if (key == "seed") seed = parse_u64(key, value);
  else if (key == "epochs") epochs = parse_u64(key, value);
  else if (key == "batch_size") batch_size = parse_u64(key, value);
  else if (key == "alpha") alpha = parse_double(key, value);
  else if (key == "lambda_s") lambda_s = parse_double(key, value);
  else if (key == "lambda_t") lambda_t = parse_double(key, value);
  else if (key == "lambda_r") lambda_r = parse_double(key, value);
  else if (key == "eta0") eta0 = parse_double(key, value);
  else if (key == "theta") theta = parse_double(key, value);
  else if (key == "beta_exp") beta_exp = parse_double(key, value);
  else if (key == "momentum") momentum = parse_double(key, value);
  else if (key == "delta") delta = parse_double(key, value);
  else if (key == "feature_dim") feature_dim = parse_u64(key, value);
  else if (key == "hidden") hidden = parse_u64(key, value);
  else if (key == "disc_hidden") disc_hidden = parse_u64(key, value);
  else if (key == "out_dir") out_dir = value;
  else if (key == "synth_seed") synth_seed = parse_u64(key, value);
  else if (key == "synth_classes") synth_classes = parse_u64(key, value);
  else if (key == "synth_per_class") synth_per_class = parse_u64(key, value);
  else if (key == "synth_eval_per_class") synth_eval_per_class = parse_u64(key, value);
  else if (key == "synth_radius") synth_radius = parse_double(key, value);
  else if (key == "synth_sigma") synth_sigma = parse_double(key, value);
  else if (key == "synth_rotation_deg") synth_rotation_deg = parse_double(key, value);
  else if (key == "synth_translate_x") synth_translate_x = parse_double(key, value);
  else if (key == "synth_translate_y") synth_translate_y = parse_double(key, value);
  else if (key == "source_images") source_images = value;
  else if (key == "source_labels") source_labels = value;
  else if (key == "target_images") target_images = value;
  else if (key == "target_labels") target_labels = value;
  else if (key == "source_eval_images") source_eval_images = value;
  else if (key == "source_eval_labels") source_eval_labels = value;
  else if (key == "target_eval_images") target_eval_images = value;
  else if (key == "target_eval_labels") target_eval_labels = value;
  else if (key == "source_limit") source_limit = parse_u64(key, value);
  else if (key == "target_limit") target_limit = parse_u64(key, value);
  else throw ConfigError("config: unknown key '" + key + "'");
}

void RunConfig::validate() const {
  if (task != "synth" && task != "digits") throw ConfigError("config: task must be 'synth' or 'digits', got '" + task + "'");
  try {
    parse_arch_kind(arch);
    parse_variant(variant);
    hyperparams().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (task == "digits") {
    if (source_images.empty()) throw ConfigError("config: digits task requires source_images");
    if (target_images.empty()) throw ConfigError("config: digits task requires target_images");
    if (target_eval_images.empty()) throw ConfigError("config: digits task requires target_eval_images");
  }
}

HyperParams RunConfig::hyperparams() const {
  HyperParams hp;
  hp.alpha = alpha;
  hp.lambda_s = lambda_s;
  hp.lambda_t = lambda_t;
  hp.lambda_r = lambda_r;
  hp.eta0 = eta0;
  hp.theta = theta;
  hp.beta_exp = beta_exp;
  hp.momentum = momentum;
  hp.delta = delta;
  hp.batch_size = batch_size;
  hp.epochs = epochs;
  hp.variant = parse_variant(variant);
  return hp;
}

Architecture RunConfig::architecture(size_t input_dim, size_t num_classes) const {
  const ArchKind kind = parse_arch_kind(arch);
  if (kind == ArchKind::mlp) {
    const size_t m = feature_dim ? feature_dim : 16;
    const size_t dh = disc_hidden ? disc_hidden : 64;
    return Architecture::make_mlp(input_dim, m, num_classes, hidden, dh);
  }
  const size_t m = feature_dim ? feature_dim : 500;
  const size_t dh = disc_hidden ? disc_hidden : 1024;
  return Architecture::make_lenet(num_classes, m, dh);
}

std::vector<std::pair<std::string, std::string>> RunConfig::items() const {
  std::vector<std::pair<std::string, std::string>> out;
  out.emplace_back("task", task);
  out.emplace_back("arch", arch);
  out.emplace_back("variant", variant);
  out.emplace_back("seed", std::to_string(seed));
  out.emplace_back("epochs", std::to_string(epochs));
  out.emplace_back("batch_size", std::to_string(batch_size));
  out.emplace_back("alpha", format_double(alpha));
  out.emplace_back("lambda_s", format_double(lambda_s));
  out.emplace_back("lambda_t", format_double(lambda_t));
  out.emplace_back("lambda_r", format_double(lambda_r));
  out.emplace_back("eta0", format_double(eta0));
  out.emplace_back("theta", format_double(theta));
  out.emplace_back("beta_exp", format_double(beta_exp));
  out.emplace_back("momentum", format_double(momentum));
  out.emplace_back("delta", format_double(delta));
  out.emplace_back("feature_dim", std::to_string(feature_dim));
  out.emplace_back("hidden", std::to_string(hidden));
  out.emplace_back("disc_hidden", std::to_string(disc_hidden));
  out.emplace_back("out_dir", out_dir);
  out.emplace_back("synth_seed", std::to_string(synth_seed));
  out.emplace_back("synth_classes", std::to_string(synth_classes));
  out.emplace_back("synth_per_class", std::to_string(synth_per_class));
  out.emplace_back("synth_eval_per_class", std::to_string(synth_eval_per_class));
  out.emplace_back("synth_radius", format_double(synth_radius));
  out.emplace_back("synth_sigma", format_double(synth_sigma));
  out.emplace_back("synth_rotation_deg", format_double(synth_rotation_deg));
  out.emplace_back("synth_translate_x", format_double(synth_translate_x));
  out.emplace_back("synth_translate_y", format_double(synth_translate_y));
  out.emplace_back("source_images", source_images);
  out.emplace_back("source_labels", source_labels);
  out.emplace_back("target_images", target_images);
  out.emplace_back("target_labels", target_labels);
  out.emplace_back("source_eval_images", source_eval_images);
  out.emplace_back("source_eval_labels", source_eval_labels);
  out.emplace_back("target_eval_images", target_eval_images);
  out.emplace_back("target_eval_labels", target_eval_labels);
  out.emplace_back("source_limit", std::to_string(source_limit));
  out.emplace_back("target_limit", std::to_string(target_limit));
  return out;
}

void apply_config_file(RunConfig& config, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  std::string line;
  size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: " + path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    config.apply(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

RunConfig parse_config_file(const std::string& path) {
  RunConfig config;
  apply_config_file(config, path);
  return config;
}

void write_config(const RunConfig& config, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("config: cannot write " + path);
  os << "# resolved run configuration\n";
  for (const auto& [key, value] : config.items()) os << key << "=" << value << "\n";
}

}  // namespace dmrl
