// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "volsurf/core/vec.hpp"
#include "volsurf/shellrender/blend.hpp"

namespace volsurf {

/// Procedural appearance of one layer. Color blends `base` and `stripe` with
/// a sinusoid along `stripe_axis`, then tints toward `rim` at grazing view
/// angles. Opacity is constant, optionally scaled by the grazing-angle
/// attenuation (a Fresnel-like falloff).
struct LayerAppearance {
  Rgb base{0.8, 0.8, 0.8};
  Rgb stripe{0.8, 0.8, 0.8};
  double stripe_frequency = 0.0;
  Vec3 stripe_axis{0.0, 1.0, 0.0};
  Rgb rim{1.0, 1.0, 1.0};
  double rim_strength = 0.0;
  double opacity = 1.0;
  bool attenuate = true;

  Rgb color(const Vec3& x, const Vec3& v, const Vec3& n) const;
  double alpha(const Vec3& x, const Vec3& v, const Vec3& n) const;
};

/// Color field xi and transparency field alpha for every layer, outermost first.
class AppearanceField {
 public:
  AppearanceField() = default;
  explicit AppearanceField(std::vector<LayerAppearance> layers);

  int layer_count() const { return static_cast<int>(layers_.size()); }
  const LayerAppearance& layer(int j) const { return layers_.at(j); }
  const std::vector<LayerAppearance>& layers() const { return layers_; }

  Rgb color(int layer, const Vec3& x, const Vec3& v, const Vec3& n) const {
    return layers_[layer].color(x, v, n);
  }
  double alpha(int layer, const Vec3& x, const Vec3& v, const Vec3& n) const {
    return layers_[layer].alpha(x, v, n);
  }

 private:
  std::vector<LayerAppearance> layers_;
};

}  // namespace volsurf
