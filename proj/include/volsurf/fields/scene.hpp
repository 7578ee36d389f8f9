// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "volsurf/fields/ksdf.hpp"
#include "volsurf/volren/appearance_field.hpp"

namespace volsurf {

/// Default sharpness schedule endpoints: wide start, support-shell insertion,
/// fully peaked end.
struct BetaSchedule {
  double beta1 = 30.0;
  double beta2 = 512.0;
  double beta3 = 4096.0;

  /// Exponential interpolation between beta1 and beta3, s in [0, 1].
  double at(double s) const;
};

/// Everything needed to render a k-SDF: geometry, appearance, working volume
/// and background.
struct Scene {
  std::string name;
  KSdf ksdf;
  AppearanceField appearance;
  Aabb bounds;
  Rgb background{1.0, 1.0, 1.0};
};

inline constexpr int kSceneFormatVersion = 1;

/// Human-readable JSON scene description.
std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);
void write_scene(const std::filesystem::path& path, const Scene& scene);
Scene read_scene(const std::filesystem::path& path);

/// Names accepted by make_canonical_scene.
std::vector<std::string> canonical_scene_names();

/// Builds one of the canonical test scenes with k layers. Support shells are
/// spaced by delta_o_init(init_beta); `beta` is the rendering sharpness.
/// Throws InvalidArgument for unknown names or k outside [1, 9].
Scene make_canonical_scene(const std::string& name, int k, double init_beta = 512.0,
                           double beta = 4096.0);

}  // namespace volsurf
