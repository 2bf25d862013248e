#pragma once

#include <functional>
#include <map>
#include <string>

#include "sdcap/tensor.h"

namespace sdcap {

// A loss over the parameters in a store. Each call must evaluate the loss at
// the current values and accumulate its analytic gradient into the store's
// grads. Must be deterministic.
using Objective = std::function<double(ParamStore&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
  // Worst error per parameter name.
  std::map<std::string, double> per_param;
};

// Compares the analytic gradient with central differences on every
// coordinate. The per-coordinate error is
//   |analytic - numeric| / max(1, |analytic|, |numeric|).
// Values are restored on return. eps must lie in [1e-7, 1e-3]; a non-finite
// loss raises NumericError.
GradCheckResult grad_check_detailed(const Objective& f, ParamStore& store,
                                    double eps = 1e-5);

double grad_check(const Objective& f, ParamStore& store, double eps = 1e-5);

}  // namespace sdcap
