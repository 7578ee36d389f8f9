// SPDX-License-Identifier: Apache-2.0
#include "volsurf/meshing/marching_cubes.hpp"

#include <string>

#include "mc_tables.hpp"
#include "volsurf/core/error.hpp"
#include "volsurf/core/parallel.hpp"

namespace volsurf {
namespace {

constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdgeCorners[12][2] = {{0, 1}, {1, 2}, {3, 2}, {0, 3}, {4, 5}, {5, 6},
                                     {7, 6}, {4, 7}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
constexpr double kSnap = 1e-6;

}  // namespace

TriMesh marching_cubes(const ScalarField& field, const Aabb& bbox, int resolution) {
  if (resolution < 8) throw InvalidArgument("marching cubes resolution must be at least 8");
  if (bbox.empty()) throw InvalidArgument("marching cubes box is empty");
  const int n = resolution + 1;  // nodes per axis
  const Vec3 cell = bbox.extent() / static_cast<double>(resolution);
  auto node_index = [n](int i, int j, int k) {
    return (static_cast<std::size_t>(k) * n + j) * n + i;
  };
  auto node_pos = [&](int i, int j, int k) {
    return Vec3{bbox.lo.x + i * cell.x, bbox.lo.y + j * cell.y, bbox.lo.z + k * cell.z};
  };

  const std::size_t nodes = static_cast<std::size_t>(n) * n * n;
  std::vector<double> values(nodes);
  parallel_for(static_cast<std::size_t>(n), 1, [&](std::size_t k0, std::size_t k1) {
    for (std::size_t k = k0; k < k1; ++k) {
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
          const double v = field.value(node_pos(i, j, static_cast<int>(k)));
          if (!std::isfinite(v)) throw NumericalError("field is not finite inside the meshing box");
          values[node_index(i, j, static_cast<int>(k))] = v;
        }
      }
    }
  });

  TriMesh mesh;
  std::vector<std::int32_t> edge_vertex(nodes * 3, -1);
  std::vector<std::int32_t> node_vertex(nodes, -1);
  auto vertex_on_edge = [&](int i, int j, int k, int axis) -> std::uint32_t {
    int o[3] = {0, 0, 0};
    o[axis] = 1;
    const std::size_t a = node_index(i, j, k);
    const std::size_t b = node_index(i + o[0], j + o[1], k + o[2]);
    const double va = values[a], vb = values[b];
    const double t = va / (va - vb);
    std::int32_t* slot = nullptr;
    Vec3 p;
    // Crossings within kSnap of a node share the node's vertex, so sliver
    // triangles collapse to repeated indices instead of zero-area faces.
    if (t <= kSnap) {
      slot = &node_vertex[a];
      p = node_pos(i, j, k);
    } else if (t >= 1.0 - kSnap) {
      slot = &node_vertex[b];
      p = node_pos(i + o[0], j + o[1], k + o[2]);
    } else {
      slot = &edge_vertex[a * 3 + axis];
      p = node_pos(i, j, k);
      p[axis] += t * cell[axis];
    }
    if (*slot < 0) {
      *slot = static_cast<std::int32_t>(mesh.positions.size());
      mesh.positions.push_back(p);
    }
    return static_cast<std::uint32_t>(*slot);
  };

  for (int k = 0; k < resolution; ++k) {
    for (int j = 0; j < resolution; ++j) {
      for (int i = 0; i < resolution; ++i) {
        int config = 0;
        for (int c = 0; c < 8; ++c) {
          if (values[node_index(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2])] < 0.0) {
            config |= 1 << c;
          }
        }
        const std::uint16_t edges = mc::kEdgeTable[config];
        if (edges == 0) continue;
        std::uint32_t vid[12] = {};
        for (int e = 0; e < 12; ++e) {
          if (!(edges & (1 << e))) continue;
          const int* lo = kCorner[kEdgeCorners[e][0]];
          const int* hi = kCorner[kEdgeCorners[e][1]];
          const int axis = hi[0] != lo[0] ? 0 : (hi[1] != lo[1] ? 1 : 2);
          vid[e] = vertex_on_edge(i + lo[0], j + lo[1], k + lo[2], axis);
        }
        const auto& tri = mc::kTriTable[config];
        for (int t = 0; t < 16 && tri[t] >= 0; t += 3) {
          // The tables wind toward the negative side; swap to face outward.
          mesh.triangles.push_back({vid[tri[t]], vid[tri[t + 2]], vid[tri[t + 1]]});
        }
      }
    }
  }

  // Only faces with repeated indices go; dropping distinct-index faces by
  // area would open cracks.
  remove_degenerate_triangles(mesh, 0.0);
  if (mesh.triangles.empty()) throw EmptyMeshError("no zero crossing inside the meshing box");

  const auto fallback = face_averaged_normals(mesh);
  mesh.normals.resize(mesh.positions.size());
  for (std::size_t v = 0; v < mesh.positions.size(); ++v) {
    const Vec3 g = field.gradient ? field.gradient(mesh.positions[v]) : Vec3{};
    mesh.normals[v] = length(g) > 1e-12 ? UnitVec3(g) : fallback[v];
  }
  return mesh;
}

TriMesh marching_cubes(const SdfField& field, const Aabb& bbox, int resolution) {
  const double h = default_gradient_step(field);
  ScalarField f{[&field](const Vec3& x) { return field.eval(x); },
                [&field, h](const Vec3& x) { return field.gradient(x, h); }};
  return marching_cubes(f, bbox, resolution);
}

}  // namespace volsurf
