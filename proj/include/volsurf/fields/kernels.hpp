// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <numbers>

namespace volsurf {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// d/dx sigmoid(x), evaluated without cancellation for large |x|.
inline double sigmoid_derivative(double x) {
  const double e = std::exp(-std::abs(x));
  return e / ((1.0 + e) * (1.0 + e));
}

/// Stable softplus; raw > 20 returns raw directly (the correction is below 2e-9).
inline double softplus(double x) {
  if (x > 20.0) return x;
  return std::log1p(std::exp(x));
}

/// Inverse of softplus for y > 0.
inline double softplus_inverse(double y) {
  if (y > 20.0) return y;
  return std::log(std::expm1(y));
}

/// log(sigmoid(x)) = -softplus(-x), accurate for both tails.
inline double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

/// Logistic density phi_beta(d) = beta e^{-beta d} / (1 + e^{-beta d})^2.
/// Evaluated on |d| so that e^{-beta|d|} never overflows.
inline double logistic_density(double beta, double d) {
  const double e = std::exp(-beta * std::abs(d));
  return beta * e / ((1.0 + e) * (1.0 + e));
}

/// Standard deviation of the logistic density, (1/beta) * pi / sqrt(3). Used
/// as the initial spacing between support shells.
inline double delta_o_init(double beta) { return std::numbers::pi / (std::sqrt(3.0) * beta); }

}  // namespace volsurf
