// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "volsurf/fields/sdf.hpp"
#include "volsurf/meshing/trimesh.hpp"

namespace volsurf {

/// Scalar field with its gradient, for meshing fields that are not a single
/// SdfField (for example one layer of a k-SDF).
struct ScalarField {
  std::function<double(const Vec3&)> value;
  std::function<Vec3(const Vec3&)> gradient;
};

/// Zero level set of `field` over `bbox` split into `resolution` cells per
/// axis. Vertices are linearly interpolated along cell edges; a vertex falling
/// on a grid node is shared by every edge through that node. Normals follow
/// the field gradient and triangles wind outward. Throws EmptyMeshError when
/// no surface crosses the box and InvalidArgument for resolution < 8.
TriMesh marching_cubes(const ScalarField& field, const Aabb& bbox, int resolution);
TriMesh marching_cubes(const SdfField& field, const Aabb& bbox, int resolution);

}  // namespace volsurf
