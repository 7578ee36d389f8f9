// SPDX-License-Identifier: Apache-2.0
#include "volsurf/shellrender/bvh.hpp"

#include <algorithm>
#include <numeric>

namespace volsurf {
namespace {

constexpr std::uint32_t kLeafSize = 4;

// Lexicographic (t, triangle) order used by every hit search.
bool closer(double t, std::uint32_t tri, const std::optional<LayerHit>& best) {
  return !best || t < best->t || (t == best->t && tri < best->triangle);
}

int max_axis(const Vec3& v) {
  const double ax = std::abs(v.x), ay = std::abs(v.y), az = std::abs(v.z);
  if (ax >= ay && ax >= az) return 0;
  return ay >= az ? 1 : 2;
}

}  // namespace

bool intersect_triangle(const Ray& ray, const Vec3& a, const Vec3& b, const Vec3& c, double& t,
                        std::array<double, 3>& bary) {
  const Vec3& d = ray.direction.vec();
  const int kz = max_axis(d);
  int kx = (kz + 1) % 3;
  int ky = (kx + 1) % 3;
  if (d[kz] < 0.0) std::swap(kx, ky);
  const double sx = d[kx] / d[kz];
  const double sy = d[ky] / d[kz];
  const double sz = 1.0 / d[kz];

  const Vec3 pa = a - ray.origin;
  const Vec3 pb = b - ray.origin;
  const Vec3 pc = c - ray.origin;
  const double ax = pa[kx] - sx * pa[kz], ay = pa[ky] - sy * pa[kz];
  const double bx = pb[kx] - sx * pb[kz], by = pb[ky] - sy * pb[kz];
  const double cx = pc[kx] - sx * pc[kz], cy = pc[ky] - sy * pc[kz];

  double u = cx * by - cy * bx;
  double v = ax * cy - ay * cx;
  double w = bx * ay - by * ax;
  if (u == 0.0 || v == 0.0 || w == 0.0) {
    const long double lu = static_cast<long double>(cx) * by - static_cast<long double>(cy) * bx;
    const long double lv = static_cast<long double>(ax) * cy - static_cast<long double>(ay) * cx;
    const long double lw = static_cast<long double>(bx) * ay - static_cast<long double>(by) * ax;
    u = static_cast<double>(lu);
    v = static_cast<double>(lv);
    w = static_cast<double>(lw);
  }
  if ((u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0)) return false;
  const double det = u + v + w;
  if (det == 0.0) return false;
  const double tt = (u * sz * pa[kz] + v * sz * pb[kz] + w * sz * pc[kz]) / det;
  if (!(tt >= ray.t_min && tt <= ray.t_max)) return false;
  t = tt;
  bary = {u / det, v / det, w / det};
  return true;
}

Bvh::Bvh(const TriMesh& mesh) {
  const std::size_t n = mesh.triangle_count();
  corners_.resize(n);
  std::vector<Vec3> centroid(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Triangle& tri = mesh.triangles[i];
    corners_[i] = {mesh.positions[tri[0]], mesh.positions[tri[1]], mesh.positions[tri[2]]};
    centroid[i] = (corners_[i][0] + corners_[i][1] + corners_[i][2]) / 3.0;
  }
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0u);
  if (n == 0) return;

  struct Task {
    std::uint32_t node, begin, end;
  };
  nodes_.push_back({});
  std::vector<Task> stack{{0, 0, static_cast<std::uint32_t>(n)}};
  while (!stack.empty()) {
    const Task task = stack.back();
    stack.pop_back();
    Aabb box, cbox;
    for (std::uint32_t i = task.begin; i < task.end; ++i) {
      for (const Vec3& p : corners_[order_[i]]) box.expand(p);
      cbox.expand(centroid[order_[i]]);
    }
    // Pad so that rounding in the slab test never rejects a triangle the
    // exact test would hit.
    const double pad = 1e-9 * std::max({box.extent().x, box.extent().y, box.extent().z, 1.0});
    box.lo -= Vec3(pad, pad, pad);
    box.hi += Vec3(pad, pad, pad);
    nodes_[task.node].box = box;

    const std::uint32_t count = task.end - task.begin;
    const Vec3 ce = cbox.extent();
    const int axis = ce.x >= ce.y && ce.x >= ce.z ? 0 : (ce.y >= ce.z ? 1 : 2);
    if (count <= kLeafSize || ce[axis] <= 0.0) {
      nodes_[task.node].first = task.begin;
      nodes_[task.node].count = count;
      continue;
    }
    const std::uint32_t mid = task.begin + count / 2;
    std::nth_element(order_.begin() + task.begin, order_.begin() + mid, order_.begin() + task.end,
                     [&](std::uint32_t l, std::uint32_t r) {
                       const double cl = centroid[l][axis], cr = centroid[r][axis];
                       return cl < cr || (cl == cr && l < r);
                     });
    const auto left = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({});
    nodes_.push_back({});
    nodes_[task.node].first = left;
    nodes_[task.node].right = left + 1;
    nodes_[task.node].count = 0;
    stack.push_back({left + 1, mid, task.end});
    stack.push_back({left, task.begin, mid});
  }
}

std::optional<LayerHit> Bvh::closest(const Ray& ray) const {
  std::optional<LayerHit> best;
  if (nodes_.empty()) return best;
  std::uint32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    Ray clipped = ray;
    if (best) clipped.t_max = best->t;
    double t0 = 0.0, t1 = 0.0;
    if (!intersect_aabb(clipped, node.box, t0, t1)) continue;
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const std::uint32_t id = order_[i];
        double t = 0.0;
        std::array<double, 3> bary{};
        if (intersect_triangle(ray, corners_[id][0], corners_[id][1], corners_[id][2], t, bary) &&
            closer(t, id, best)) {
          LayerHit h;
          h.t = t;
          h.triangle = id;
          h.barycentric = bary;
          best = h;
        }
      }
      continue;
    }
    // Visit the nearer child first.
    std::uint32_t near = node.first, far = node.right;
    double n0 = 0.0, n1 = 0.0, f0 = 0.0, f1 = 0.0;
    const bool hn = intersect_aabb(clipped, nodes_[near].box, n0, n1);
    const bool hf = intersect_aabb(clipped, nodes_[far].box, f0, f1);
    if (hn && hf) {
      if (f0 < n0) std::swap(near, far);
      stack[top++] = far;
      stack[top++] = near;
    } else if (hn) {
      stack[top++] = near;
    } else if (hf) {
      stack[top++] = far;
    }
  }
  return best;
}

void complete_hit(const TriMesh& mesh, LayerHit& hit) {
  const Triangle& tri = mesh.triangles[hit.triangle];
  const auto& w = hit.barycentric;
  if (mesh.has_uvs()) {
    hit.uv = mesh.uvs[tri[0]] * w[0] + mesh.uvs[tri[1]] * w[1] + mesh.uvs[tri[2]] * w[2];
  } else {
    hit.uv = {};
  }
  Vec3 n;
  if (mesh.has_normals()) {
    n = mesh.normals[tri[0]].vec() * w[0] + mesh.normals[tri[1]].vec() * w[1] +
        mesh.normals[tri[2]].vec() * w[2];
  }
  if (!(length(n) > 1e-12)) n = mesh.face_cross(hit.triangle);
  if (!(length(n) > 0.0)) n = Vec3(0.0, 0.0, 1.0);
  hit.normal = UnitVec3(n);
}

std::optional<LayerHit> first_hit(const Bvh& bvh, const TriMesh& mesh, const Ray& ray) {
  auto hit = bvh.closest(ray);
  if (hit) complete_hit(mesh, *hit);
  return hit;
}

std::optional<LayerHit> brute_force_first_hit(const TriMesh& mesh, const Ray& ray) {
  std::optional<LayerHit> best;
  for (std::uint32_t id = 0; id < mesh.triangle_count(); ++id) {
    const Triangle& tri = mesh.triangles[id];
    double t = 0.0;
    std::array<double, 3> bary{};
    if (intersect_triangle(ray, mesh.positions[tri[0]], mesh.positions[tri[1]],
                           mesh.positions[tri[2]], t, bary) &&
        closer(t, id, best)) {
      LayerHit h;
      h.t = t;
      h.triangle = id;
      h.barycentric = bary;
      best = h;
    }
  }
  if (best) complete_hit(mesh, *best);
  return best;
}

}  // namespace volsurf
