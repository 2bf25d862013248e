#include "sdcap/gradcheck.h"

#include <algorithm>
#include <cmath>

#include "sdcap/error.h"

namespace sdcap {

namespace {

double eval(const Objective& f, ParamStore& store) {
  const double loss = f(store);
  if (!std::isfinite(loss)) throw NumericError("grad_check: non-finite loss");
  return loss;
}

}  // namespace

GradCheckResult grad_check_detailed(const Objective& f, ParamStore& store,
                                    double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw ConfigError("grad_check: eps must lie in [1e-7, 1e-3]");
  }
  store.zero_grad();
  eval(f, store);

  std::vector<std::pair<std::string, Vec>> analytic;
  for (const auto& [name, p] : store) {
    analytic.emplace_back(name, Vec(p.grad.data().begin(), p.grad.data().end()));
  }

  GradCheckResult result;
  for (const auto& [name, grad] : analytic) {
    double& worst = result.per_param[name];
    auto values = store.get(name).value.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = eval(f, store);
      values[i] = saved - eps;
      const double down = eval(f, store);
      values[i] = saved;

      const double numeric = (up - down) / (2.0 * eps);
      const double denom = std::max({1.0, std::abs(grad[i]), std::abs(numeric)});
      const double err = std::abs(grad[i] - numeric) / denom;
      ++result.coordinates;
      worst = std::max(worst, err);
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = name;
        result.worst_index = i;
      }
    }
  }
  store.zero_grad();
  return result;
}

double grad_check(const Objective& f, ParamStore& store, double eps) {
  return grad_check_detailed(f, store, eps).max_rel_error;
}

}  // namespace sdcap
