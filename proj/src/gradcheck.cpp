#include "dmrl/gradcheck.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace dmrl {

std::string GradCheckResult::describe() const {
  std::ostringstream os;
  os << "max_rel_error=" << max_rel_error;
  if (!worst_param.empty()) {
    os << " at " << worst_param << "[" << worst_index << "]"
       << " analytic=" << worst_analytic << " numeric=" << worst_numeric;
  }
  os << " (" << checked << " coordinates";
  if (excluded) os << ", " << excluded << " excluded";
  os << ")";
  return os.str();
}

GradCheckResult finite_diff_check(const std::function<Tensor()>& f, ModelParams& params, double h,
                                  const std::function<bool(const std::string&, size_t)>& exclude) {
  if (h <= 0.0) throw std::invalid_argument("finite_diff_check: step must be positive");

  std::map<std::string, std::vector<double>> analytic;
  {
    params.zero_grads();
    Tape tape;
    Tensor root = f();
    tape.backward(root);
    for (const auto& [name, t] : params.values) {
      analytic.emplace(name, t.has_grad() ? t.grad() : std::vector<double>(t.numel(), 0.0));
    }
    params.zero_grads();
  }

  GradCheckResult result;
  for (auto& [name, t] : params.values) {
    std::vector<double>& values = t.data();
    const std::vector<double>& a = analytic.at(name);
    for (size_t i = 0; i < values.size(); ++i) {
      if (exclude && exclude(name, i)) {
        ++result.excluded;
        continue;
      }
      const double saved = values[i];
      values[i] = saved + h;
      const double f_plus = f().item();
      values[i] = saved - h;
      const double f_minus = f().item();
      values[i] = saved;

      const double numeric = (f_plus - f_minus) / (2.0 * h);
      const double denom = std::max(1e-8, std::fabs(a[i]) + std::fabs(numeric));
      const double rel = std::fabs(a[i] - numeric) / denom;
      ++result.checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = name;
        result.worst_index = i;
        result.worst_analytic = a[i];
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace dmrl
