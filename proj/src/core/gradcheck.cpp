#include "pits/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pits {

GradCheckResult finite_difference_check(const std::function<double()>& loss,
                                        std::span<const ParamView> params, double eps) {
  if (!(eps >= 1e-5 && eps <= 1e-2)) {
    throw std::invalid_argument("finite_difference_check: eps must be in [1e-5, 1e-2]");
  }
  const double f0 = loss();
  const double f0_again = loss();
  if (f0 != f0_again) {
    throw std::runtime_error("finite_difference_check: loss is not deterministic (" +
                             std::to_string(f0) + " vs " + std::to_string(f0_again) + ")");
  }

  GradCheckResult result;
  for (const auto& p : params) {
    if (p.value.size() != p.grad.size()) {
      throw std::invalid_argument("finite_difference_check: value/grad size mismatch for " + p.name);
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + eps;
      const double up = loss();
      p.value[i] = saved - eps;
      const double down = loss();
      p.value[i] = saved;

      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p.grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      ++result.coordinates;
      if (!(rel <= result.max_rel_error)) {
        result.max_rel_error = std::isnan(rel) ? INFINITY : rel;
        result.worst_param = p.name;
        result.worst_index = i;
        result.analytic = analytic;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace pits
