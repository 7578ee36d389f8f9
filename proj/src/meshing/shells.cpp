// SPDX-License-Identifier: Apache-2.0
#include "volsurf/meshing/shells.hpp"

#include <algorithm>
#include <string>

#include "volsurf/core/error.hpp"
#include "volsurf/core/parallel.hpp"
#include "volsurf/meshing/marching_cubes.hpp"

namespace volsurf {

ShellSet extract_shells(const KSdf& k, const Aabb& bbox, int resolution,
                        const SimplifyConfig& simplify, const AtlasConfig& atlas,
                        ShellReport* report) {
  const int layers = k.k();
  ShellSet set;
  set.shells.resize(layers);
  ShellReport rep;
  rep.simplify.resize(layers);
  rep.atlas.resize(layers);
  rep.budgets.resize(layers);

  parallel_for(static_cast<std::size_t>(layers), 1, [&](std::size_t j0, std::size_t j1) {
    for (std::size_t jj = j0; jj < j1; ++jj) {
      const int j = static_cast<int>(jj);
      ScalarField field{[&k, j](const Vec3& x) { return k.layer_distance(j, x); },
                        [&k, j](const Vec3& x) { return k.layer_gradient(j, x); }};
      TriMesh mesh;
      try {
        mesh = marching_cubes(field, bbox, resolution);
      } catch (const EmptyMeshError&) {
        throw EmptyMeshError("layer " + std::to_string(j) + " produced an empty shell");
      }

      SimplifyConfig sc = simplify;
      double budget = simplify.max_distance;
      if (layers > 1) budget = std::min(budget, kNestingBudgetFraction * k.min_gap(j));
      if (!sc.distance) sc.distance = field.value;
      sc.max_distance = budget;
      rep.budgets[jj] = budget;
      TriMesh simplified = simplify_qem(mesh, sc, &rep.simplify[jj]);

      TriMesh shell = generate_uv_atlas(simplified, atlas, &rep.atlas[jj]);
      shell.normals.resize(shell.positions.size());
      for (std::size_t v = 0; v < shell.positions.size(); ++v) {
        const Vec3 g = field.gradient(shell.positions[v]);
        if (length(g) > 1e-12) shell.normals[v] = UnitVec3(g);
      }
      shell.layer_index = j;
      set.shells[jj] = std::move(shell);
    }
  });
  if (report) *report = std::move(rep);
  return set;
}

}  // namespace volsurf
