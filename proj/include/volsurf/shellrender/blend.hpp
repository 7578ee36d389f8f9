// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <span>

#include "volsurf/core/vec.hpp"

namespace volsurf {

/// Grazing-angle opacity weight 2*sigmoid(10|v.n|) - 1, i.e. tanh(5|v.n|).
inline double alpha_attenuation(const Vec3& v, const Vec3& n) {
  return std::tanh(5.0 * std::abs(dot(v, n)));
}

/// One layer's contribution: straight (non-premultiplied) color and opacity.
struct LayerSample {
  Rgb color;
  double alpha = 0.0;
};

/// Accumulates layers front to back. Every renderer funnels through this so
/// the floating-point operation order is identical across code paths.
struct FrontToBack {
  Rgb color;                  // premultiplied
  double transmittance = 1.0;

  void add(const LayerSample& s) {
    const double w = s.alpha * transmittance;
    color = color + s.color * w;
    transmittance *= 1.0 - s.alpha;
  }
  /// Premultiplied color and coverage.
  Rgba result() const { return {color.r, color.g, color.b, 1.0 - transmittance}; }
  /// Straight color over an opaque background, alpha = coverage.
  Rgba over(const Rgb& background) const {
    const Rgb c = color + background * transmittance;
    return {c.r, c.g, c.b, 1.0 - transmittance};
  }
};

/// Front-to-back compositing of layers ordered outermost first:
/// C = sum_i C_i A_i prod_{j<i} (1 - A_j), A = 1 - prod_i (1 - A_i).
/// The returned color is premultiplied by coverage.
inline Rgba blend_fixed_order(std::span<const LayerSample> layers) {
  FrontToBack acc;
  for (const auto& l : layers) acc.add(l);
  return acc.result();
}

/// Premultiplied color plus coverage composited over an opaque background.
inline Rgba composite_over(const Rgba& premultiplied, const Rgb& background) {
  const double t = 1.0 - premultiplied.a;
  return {premultiplied.r + background.r * t, premultiplied.g + background.g * t,
          premultiplied.b + background.b * t, premultiplied.a};
}

}  // namespace volsurf
