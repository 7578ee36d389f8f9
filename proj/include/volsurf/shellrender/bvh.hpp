// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "volsurf/core/vec.hpp"
#include "volsurf/meshing/trimesh.hpp"

namespace volsurf {

/// Nearest intersection of a ray with one layer mesh.
struct LayerHit {
  double t = 0.0;
  std::uint32_t triangle = 0;
  std::array<double, 3> barycentric{};  // weights of the triangle's vertices 0, 1, 2
  Vec2 uv;
  UnitVec3 normal;
};

/// Ray/triangle test with the watertight formulation: edges shared by two
/// triangles are evaluated identically from both sides, so rays cannot slip
/// through. Two-sided. On a hit inside [ray.t_min, ray.t_max] writes t and
/// barycentrics.
bool intersect_triangle(const Ray& ray, const Vec3& a, const Vec3& b, const Vec3& c, double& t,
                        std::array<double, 3>& bary);

/// Bounding volume hierarchy over one mesh, median split on the longest
/// centroid axis, at most four triangles per leaf. Keeps its own copy of the
/// triangle corners, so it does not reference the mesh after construction.
class Bvh {
 public:
  struct Node {
    Aabb box;
    std::uint32_t first = 0;  // leaf: first entry in order; inner: left child
    std::uint32_t count = 0;  // leaf: number of triangles; inner: 0
    std::uint32_t right = 0;  // inner: right child
  };

  Bvh() = default;
  explicit Bvh(const TriMesh& mesh);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<std::uint32_t>& order() const { return order_; }
  std::size_t triangle_count() const { return order_.size(); }

  /// Smallest-t hit, ties broken by lowest triangle id. Fills t, triangle and
  /// barycentrics only.
  std::optional<LayerHit> closest(const Ray& ray) const;

 private:
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> order_;
  std::vector<std::array<Vec3, 3>> corners_;  // indexed by triangle id
};

/// Fills uv (zero when the mesh has none) and the renormalized interpolated
/// vertex normal (face normal when absent or degenerate).
void complete_hit(const TriMesh& mesh, LayerHit& hit);

/// BVH query followed by complete_hit.
std::optional<LayerHit> first_hit(const Bvh& bvh, const TriMesh& mesh, const Ray& ray);

/// Tests every triangle in id order. Reference for the BVH.
std::optional<LayerHit> brute_force_first_hit(const TriMesh& mesh, const Ray& ray);

}  // namespace volsurf
