#pragma once

#include <functional>
#include <string>

#include "dmrl/models.hpp"
#include "dmrl/tensor.hpp"

namespace dmrl {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  size_t checked = 0;
  size_t excluded = 0;

  std::string describe() const;
};

// Compares tape gradients of the scalar f() against central differences
// (f(p+h) - f(p-h)) / 2h for every coordinate of every parameter. f must
// build its value from the current parameter data and be deterministic.
// Returns the max over coordinates of
//   |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
//
// `exclude(name, index)` skips coordinates where f is not differentiable
// (e.g. a relu input sitting exactly at 0); excluded coordinates are counted
// but do not contribute to the maximum.
GradCheckResult finite_diff_check(const std::function<Tensor()>& f, ModelParams& params, double h = 1e-5,
                                  const std::function<bool(const std::string&, size_t)>& exclude = {});

}  // namespace dmrl
