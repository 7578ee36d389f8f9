// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "volsurf/meshing/trimesh.hpp"

namespace volsurf {

struct AtlasConfig {
  /// Side of the square atlas in texels.
  int resolution = 256;
  /// Empty texels kept around every chart.
  int gutter = 2;
  int max_charts = 64;
  /// Requested texel density; 0 picks the largest density that fits.
  double texels_per_unit = 0.0;
};

struct AtlasReport {
  int charts = 0;
  double texels_per_unit = 0.0;
  std::vector<std::string> warnings;
};

/// Normal-cone region growing, planar projection of each chart along its seed
/// normal, and skyline packing with gutters (charts may turn by 90 degrees).
/// Vertices on chart seams are duplicated. UV (0, 0) is the first texel of the first row.
TriMesh generate_uv_atlas(const TriMesh& mesh, const AtlasConfig& cfg, AtlasReport* report = nullptr);

/// Chart id per triangle of an atlased mesh, from UV connectivity.
std::vector<int> uv_chart_ids(const TriMesh& mesh);

}  // namespace volsurf
