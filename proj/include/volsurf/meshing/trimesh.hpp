// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "volsurf/core/vec.hpp"

namespace volsurf {

using Triangle = std::array<std::uint32_t, 3>;

/// Indexed triangle mesh. Normals and UVs are per vertex and either empty or
/// sized like `positions`. Triangles wind counter-clockwise seen from outside.
struct TriMesh {
  std::vector<Vec3> positions;
  std::vector<UnitVec3> normals;
  std::vector<Vec2> uvs;
  std::vector<Triangle> triangles;
  int layer_index = 0;

  std::size_t vertex_count() const { return positions.size(); }
  std::size_t triangle_count() const { return triangles.size(); }
  bool has_normals() const { return !normals.empty(); }
  bool has_uvs() const { return !uvs.empty(); }

  Aabb bounds() const;
  /// Unnormalized face normal (b - a) x (c - a); its length is twice the area.
  Vec3 face_cross(std::size_t t) const;
  double face_area(std::size_t t) const { return 0.5 * length(face_cross(t)); }

  /// Throws FormatError on out-of-range indices or mismatched attribute sizes.
  void validate() const;
};

/// Topology summary; edges are counted on vertex indices.
struct MeshTopology {
  std::size_t vertices = 0;  // referenced by at least one triangle
  std::size_t edges = 0;
  std::size_t faces = 0;
  std::size_t boundary_edges = 0;     // used by one triangle
  std::size_t nonmanifold_edges = 0;  // used by more than two
  int components = 0;
  long euler_characteristic() const {
    return static_cast<long>(vertices) - static_cast<long>(edges) + static_cast<long>(faces);
  }
  bool closed_manifold() const { return boundary_edges == 0 && nonmanifold_edges == 0; }
};

MeshTopology analyze_topology(const TriMesh& mesh);

/// Removes triangles with repeated indices or area below `min_area`, then drops
/// unreferenced vertices. Returns the number of triangles removed.
std::size_t remove_degenerate_triangles(TriMesh& mesh, double min_area = 1e-12);

/// Area-weighted average of incident face normals; zero-area stars fall back
/// to +z.
std::vector<UnitVec3> face_averaged_normals(const TriMesh& mesh);

/// Meshes ordered outermost first; shells[j].layer_index == j.
struct ShellSet {
  std::vector<TriMesh> shells;
  int k() const { return static_cast<int>(shells.size()); }
};

}  // namespace volsurf
