// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "volsurf/fields/ksdf.hpp"
#include "volsurf/meshing/atlas.hpp"
#include "volsurf/meshing/simplify.hpp"
#include "volsurf/meshing/trimesh.hpp"

namespace volsurf {

struct ShellReport {
  std::vector<SimplifyReport> simplify;
  std::vector<AtlasReport> atlas;
  /// Geometric budget used for each layer.
  std::vector<double> budgets;
};

/// Fraction of the smallest neighbouring gap a simplified shell may deviate
/// from its level set, so adjacent shells cannot cross.
inline constexpr double kNestingBudgetFraction = 1.0 / 3.0;

/// Per layer: marching cubes on the layer distance, simplification under a
/// geometric budget of kNestingBudgetFraction times the smallest gap (capped by
/// simplify.max_distance), UV atlas, then normals re-baked from the layer
/// gradient. Throws EmptyMeshError naming the layer that came out empty.
ShellSet extract_shells(const KSdf& k, const Aabb& bbox, int resolution,
                        const SimplifyConfig& simplify, const AtlasConfig& atlas,
                        ShellReport* report = nullptr);

}  // namespace volsurf
