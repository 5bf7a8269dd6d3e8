#pragma once

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <span>
#include <vector>

#include "stlcbf/error.hpp"

namespace stlcbf {

struct SmoothMin {
  double value = 0.0;
  /// d value / d h_k; non-negative, sums to one.
  std::vector<double> weights;
};

/// Log-sum-exp under-approximation of the minimum,
///   -(1/kappa) ln sum_k exp(-kappa h_k),
/// evaluated with a shift by the true minimum so large kappa * h products do
/// not overflow. Satisfies  min(h) - ln(p)/kappa <= value <= min(h).
inline SmoothMin smooth_min(std::span<const double> values, double kappa) {
  STLCBF_THROW_UNLESS(!values.empty(), SpecError, "smooth_min of an empty list");
  STLCBF_THROW_UNLESS(kappa > 0.0 && std::isfinite(kappa), SpecError,
                      "smooth_min sharpness must be positive");
  SmoothMin out;
  out.weights.resize(values.size());
  if (values.size() == 1) {
    out.value = values[0];
    out.weights[0] = 1.0;
    return out;
  }
  const double m = *std::min_element(values.begin(), values.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    out.weights[k] = std::exp(-kappa * (values[k] - m));
    sum += out.weights[k];
  }
  for (auto& w : out.weights) w /= sum;
  // sum >= 1 since the minimising term contributes exp(0).
  out.value = m - std::log(sum) / kappa;
  return out;
}

inline SmoothMin smooth_min(std::initializer_list<double> values, double kappa) {
  return smooth_min(std::span<const double>(values.begin(), values.size()), kappa);
}

}  // namespace stlcbf
