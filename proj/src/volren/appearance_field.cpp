// SPDX-License-Identifier: Apache-2.0
#include "volsurf/volren/appearance_field.hpp"

#include <algorithm>
#include <cmath>

#include "volsurf/core/error.hpp"

namespace volsurf {
namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

bool in_unit_range(const Rgb& c) {
  return c.r >= 0 && c.r <= 1 && c.g >= 0 && c.g <= 1 && c.b >= 0 && c.b <= 1;
}

}  // namespace

Rgb LayerAppearance::color(const Vec3& x, const Vec3& v, const Vec3& n) const {
  Rgb c = base;
  if (stripe_frequency != 0.0) {
    const double s = 0.5 + 0.5 * std::sin(stripe_frequency * dot(stripe_axis, x));
    c = lerp(base, stripe, s);
  }
  if (rim_strength != 0.0) {
    const double g = 1.0 - std::abs(dot(v, n));
    c = lerp(c, rim, clamp01(rim_strength * g * g));
  }
  return {clamp01(c.r), clamp01(c.g), clamp01(c.b)};
}

double LayerAppearance::alpha(const Vec3&, const Vec3& v, const Vec3& n) const {
  const double a = attenuate ? opacity * alpha_attenuation(v, n) : opacity;
  return clamp01(a);
}

AppearanceField::AppearanceField(std::vector<LayerAppearance> layers) : layers_(std::move(layers)) {
  for (const auto& l : layers_) {
    if (!in_unit_range(l.base) || !in_unit_range(l.stripe) || !in_unit_range(l.rim)) {
      throw InvalidArgument("appearance colors must lie in [0,1]");
    }
    if (!(l.opacity >= 0.0 && l.opacity <= 1.0)) throw InvalidArgument("opacity must lie in [0,1]");
    if (!(l.rim_strength >= 0.0 && l.rim_strength <= 1.0)) {
      throw InvalidArgument("rim strength must lie in [0,1]");
    }
  }
}

}  // namespace volsurf
