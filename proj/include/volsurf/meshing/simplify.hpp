// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <limits>

#include "volsurf/meshing/trimesh.hpp"

namespace volsurf {

struct SimplifyConfig {
  /// Fraction of triangles to keep, in (0, 1].
  double target_ratio = 0.02;
  /// Reject collapses that would change topology (link condition).
  bool preserve_topology = true;
  /// Optional signed distance to the surface being approximated. When set, a
  /// collapse is rejected if any affected triangle's vertices, edge midpoints
  /// or centroid end up farther than `max_distance` from it.
  std::function<double(const Vec3&)> distance;
  double max_distance = std::numeric_limits<double>::infinity();
};

struct SimplifyReport {
  std::size_t input_triangles = 0;
  std::size_t output_triangles = 0;
  std::size_t target_triangles = 0;
  double achieved_ratio = 1.0;
  /// True when no valid collapse remained before reaching the target.
  bool stopped_early = false;
  /// Largest |distance| over the checked points of the output, 0 without a
  /// distance function.
  double max_measured_distance = 0.0;
};

/// Quadric-error edge-collapse simplification down to
/// max(4, ceil(ratio * triangles)) triangles. UVs are dropped; surviving
/// vertices keep their normals.
TriMesh simplify_qem(const TriMesh& mesh, const SimplifyConfig& cfg,
                     SimplifyReport* report = nullptr);

}  // namespace volsurf
