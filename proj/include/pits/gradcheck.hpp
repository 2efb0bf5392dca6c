#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace pits {

// One parameter tensor as seen by the gradient checker: values are perturbed
// in place, `grad` holds the analytic gradient computed beforehand.
struct ParamView {
  std::string name;
  std::span<double> value;
  std::span<const double> grad;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

// Central differences (f(t+eps) - f(t-eps)) / (2 eps) against the analytic
// gradient, coordinate by coordinate. Relative error is
// |a - n| / max(|a|, |n|, 1e-8). `loss` must be deterministic; two
// evaluations at the starting point that differ raise std::runtime_error.
GradCheckResult finite_difference_check(const std::function<double()>& loss,
                                        std::span<const ParamView> params, double eps = 1e-5);

}  // namespace pits
