// SPDX-License-Identifier: Apache-2.0
#include "volsurf/meshing/trimesh.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <unordered_map>

#include "volsurf/core/error.hpp"

namespace volsurf {
namespace {

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

Aabb TriMesh::bounds() const {
  Aabb b;
  for (const auto& p : positions) b.expand(p);
  return b;
}

Vec3 TriMesh::face_cross(std::size_t t) const {
  const auto& f = triangles[t];
  const Vec3& a = positions[f[0]];
  return cross(positions[f[1]] - a, positions[f[2]] - a);
}

void TriMesh::validate() const {
  if (!normals.empty() && normals.size() != positions.size()) {
    throw FormatError("mesh normals do not match vertex count");
  }
  if (!uvs.empty() && uvs.size() != positions.size()) {
    throw FormatError("mesh UVs do not match vertex count");
  }
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    for (std::uint32_t i : triangles[t]) {
      if (i >= positions.size()) {
        throw FormatError("triangle " + std::to_string(t) + " references vertex " + std::to_string(i) +
                          " of " + std::to_string(positions.size()));
      }
    }
  }
}

MeshTopology analyze_topology(const TriMesh& mesh) {
  MeshTopology topo;
  topo.faces = mesh.triangles.size();
  std::unordered_map<std::uint64_t, int> edge_use;
  edge_use.reserve(mesh.triangles.size() * 2);
  std::vector<char> used(mesh.positions.size(), 0);
  std::vector<int> parent(mesh.positions.size());
  std::iota(parent.begin(), parent.end(), 0);
  for (const auto& f : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      const std::uint32_t a = f[e], b = f[(e + 1) % 3];
      ++edge_use[edge_key(a, b)];
      used[a] = 1;
      const int ra = find_root(parent, static_cast<int>(a));
      const int rb = find_root(parent, static_cast<int>(b));
      if (ra != rb) parent[ra] = rb;
    }
  }
  topo.edges = edge_use.size();
  for (const auto& [key, count] : edge_use) {
    if (count == 1) ++topo.boundary_edges;
    if (count > 2) ++topo.nonmanifold_edges;
  }
  for (std::size_t v = 0; v < used.size(); ++v) {
    if (!used[v]) continue;
    ++topo.vertices;
    if (find_root(parent, static_cast<int>(v)) == static_cast<int>(v)) ++topo.components;
  }
  return topo;
}

std::size_t remove_degenerate_triangles(TriMesh& mesh, double min_area) {
  const std::size_t before = mesh.triangles.size();
  std::vector<Triangle> kept;
  kept.reserve(before);
  for (std::size_t t = 0; t < before; ++t) {
    const auto& f = mesh.triangles[t];
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) continue;
    if (!(mesh.face_area(t) >= min_area)) continue;
    kept.push_back(f);
  }
  mesh.triangles = std::move(kept);

  std::vector<std::int64_t> remap(mesh.positions.size(), -1);
  std::size_t next = 0;
  for (auto& f : mesh.triangles) {
    for (auto& i : f) {
      if (remap[i] < 0) remap[i] = static_cast<std::int64_t>(next++);
      i = static_cast<std::uint32_t>(remap[i]);
    }
  }
  std::vector<Vec3> positions(next);
  std::vector<UnitVec3> normals(mesh.has_normals() ? next : 0);
  std::vector<Vec2> uvs(mesh.has_uvs() ? next : 0);
  for (std::size_t v = 0; v < remap.size(); ++v) {
    if (remap[v] < 0) continue;
    positions[remap[v]] = mesh.positions[v];
    if (!normals.empty()) normals[remap[v]] = mesh.normals[v];
    if (!uvs.empty()) uvs[remap[v]] = mesh.uvs[v];
  }
  mesh.positions = std::move(positions);
  mesh.normals = std::move(normals);
  mesh.uvs = std::move(uvs);
  return before - mesh.triangles.size();
}

std::vector<UnitVec3> face_averaged_normals(const TriMesh& mesh) {
  std::vector<Vec3> acc(mesh.positions.size());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const Vec3 c = mesh.face_cross(t);
    for (std::uint32_t i : mesh.triangles[t]) acc[i] += c;
  }
  std::vector<UnitVec3> out(acc.size());
  for (std::size_t v = 0; v < acc.size(); ++v) {
    if (length(acc[v]) > 0.0) out[v] = UnitVec3(acc[v]);
  }
  return out;
}

}  // namespace volsurf
