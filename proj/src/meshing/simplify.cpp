// SPDX-License-Identifier: Apache-2.0
#include "volsurf/meshing/simplify.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "volsurf/core/error.hpp"

namespace volsurf {
namespace {

// Symmetric 4x4 quadric stored as its upper triangle.
struct Quadric {
  double a00 = 0, a01 = 0, a02 = 0, a03 = 0, a11 = 0, a12 = 0, a13 = 0, a22 = 0, a23 = 0, a33 = 0;

  static Quadric plane(const Vec3& n, double d, double w) {
    Quadric q;
    q.a00 = w * n.x * n.x;
    q.a01 = w * n.x * n.y;
    q.a02 = w * n.x * n.z;
    q.a03 = w * n.x * d;
    q.a11 = w * n.y * n.y;
    q.a12 = w * n.y * n.z;
    q.a13 = w * n.y * d;
    q.a22 = w * n.z * n.z;
    q.a23 = w * n.z * d;
    q.a33 = w * d * d;
    return q;
  }
  Quadric& operator+=(const Quadric& o) {
    a00 += o.a00, a01 += o.a01, a02 += o.a02, a03 += o.a03, a11 += o.a11;
    a12 += o.a12, a13 += o.a13, a22 += o.a22, a23 += o.a23, a33 += o.a33;
    return *this;
  }
  Quadric operator+(const Quadric& o) const {
    Quadric q = *this;
    q += o;
    return q;
  }
  double error(const Vec3& p) const {
    return a00 * p.x * p.x + 2 * a01 * p.x * p.y + 2 * a02 * p.x * p.z + 2 * a03 * p.x +
           a11 * p.y * p.y + 2 * a12 * p.y * p.z + 2 * a13 * p.y + a22 * p.z * p.z + 2 * a23 * p.z +
           a33;
  }
  /// Minimizer of the quadric, if the 3x3 block is well conditioned.
  bool minimizer(Vec3& out) const {
    const double det = a00 * (a11 * a22 - a12 * a12) - a01 * (a01 * a22 - a12 * a02) +
                       a02 * (a01 * a12 - a11 * a02);
    const double scale = std::abs(a00) + std::abs(a11) + std::abs(a22);
    if (!(std::abs(det) > 1e-10 * scale * scale * scale) || scale == 0.0) return false;
    const Vec3 b{-a03, -a13, -a23};
    const double inv = 1.0 / det;
    out.x = inv * (b.x * (a11 * a22 - a12 * a12) - a01 * (b.y * a22 - a12 * b.z) +
                   a02 * (b.y * a12 - a11 * b.z));
    out.y = inv * (a00 * (b.y * a22 - a12 * b.z) - b.x * (a01 * a22 - a12 * a02) +
                   a02 * (a01 * b.z - b.y * a02));
    out.z = inv * (a00 * (a11 * b.z - b.y * a12) - a01 * (a01 * b.z - b.y * a02) +
                   b.x * (a01 * a12 - a11 * a02));
    return is_finite(out);
  }
};

struct Candidate {
  double cost;
  std::uint32_t u, v;
  std::uint32_t version_u, version_v;
  Vec3 target;
  bool operator>(const Candidate& o) const {
    if (cost != o.cost) return cost > o.cost;
    if (u != o.u) return u > o.u;
    return v > o.v;
  }
};

// Barycentric sample points checked against the distance budget.
constexpr double kBudgetSamples[8][3] = {
    {1, 0, 0},          {0, 1, 0},       {0, 0, 1},       {0.5, 0.5, 0},
    {0, 0.5, 0.5},      {0.5, 0, 0.5},   {1.0 / 3, 1.0 / 3, 1.0 / 3},
    {0.5, 0.25, 0.25}};

class Simplifier {
 public:
  Simplifier(const TriMesh& mesh, const SimplifyConfig& cfg) : cfg_(cfg), mesh_(mesh) {
    pos_ = mesh.positions;
    tri_ = mesh.triangles;
    face_alive_.assign(tri_.size(), 1);
    vertex_alive_.assign(pos_.size(), 1);
    version_.assign(pos_.size(), 0);
    vf_.resize(pos_.size());
    for (std::uint32_t f = 0; f < tri_.size(); ++f) {
      for (std::uint32_t i : tri_[f]) vf_[i].push_back(f);
    }
    build_quadrics();
    alive_faces_ = tri_.size();
  }

  std::size_t run(std::size_t target) {
    for (std::uint32_t u = 0; u < pos_.size(); ++u) {
      for (std::uint32_t w : neighbours(u)) {
        if (u < w) push(u, w);
      }
    }
    while (alive_faces_ > target && !heap_.empty()) {
      const Candidate c = heap_.top();
      heap_.pop();
      if (!vertex_alive_[c.u] || !vertex_alive_[c.v]) continue;
      if (version_[c.u] != c.version_u || version_[c.v] != c.version_v) continue;
      collapse_if_valid(c);
    }
    return alive_faces_;
  }

  TriMesh result() const {
    TriMesh out;
    out.layer_index = mesh_.layer_index;
    std::vector<std::int64_t> remap(pos_.size(), -1);
    for (std::size_t f = 0; f < tri_.size(); ++f) {
      if (!face_alive_[f]) continue;
      Triangle t = tri_[f];
      for (auto& i : t) {
        if (remap[i] < 0) {
          remap[i] = static_cast<std::int64_t>(out.positions.size());
          out.positions.push_back(pos_[i]);
          if (mesh_.has_normals()) out.normals.push_back(mesh_.normals[i]);
        }
        i = static_cast<std::uint32_t>(remap[i]);
      }
      out.triangles.push_back(t);
    }
    return out;
  }

 private:
  void build_quadrics() {
    q_.assign(pos_.size(), Quadric{});
    std::vector<std::pair<std::uint64_t, std::uint32_t>> edges;
    for (std::uint32_t f = 0; f < tri_.size(); ++f) {
      const Vec3 c = face_cross(f, tri_[f]);
      const double len = length(c);
      if (!(len > 0.0)) continue;
      const Vec3 n = c / len;
      const Quadric q = Quadric::plane(n, -dot(n, pos_[tri_[f][0]]), 0.5 * len);
      for (std::uint32_t i : tri_[f]) q_[i] += q;
      for (int e = 0; e < 3; ++e) {
        std::uint32_t a = tri_[f][e], b = tri_[f][(e + 1) % 3];
        if (a > b) std::swap(a, b);
        edges.push_back({(static_cast<std::uint64_t>(a) << 32) | b, f});
      }
    }
    // Boundary edges get a steep perpendicular plane so the border stays put.
    std::sort(edges.begin(), edges.end());
    for (std::size_t i = 0; i < edges.size();) {
      std::size_t j = i;
      while (j < edges.size() && edges[j].first == edges[i].first) ++j;
      if (j - i == 1) {
        const std::uint32_t a = static_cast<std::uint32_t>(edges[i].first >> 32);
        const std::uint32_t b = static_cast<std::uint32_t>(edges[i].first & 0xffffffffu);
        const std::uint32_t f = edges[i].second;
        const Vec3 e = pos_[b] - pos_[a];
        const Vec3 fn = face_cross(f, tri_[f]);
        const Vec3 p = cross(e, fn);
        const double len = length(p);
        if (len > 0.0) {
          const Vec3 n = p / len;
          const Quadric q = Quadric::plane(n, -dot(n, pos_[a]), 100.0 * dot(e, e));
          q_[a] += q;
          q_[b] += q;
        }
      }
      i = j;
    }
  }

  Vec3 face_cross(std::uint32_t, const Triangle& t) const {
    return cross(pos_[t[1]] - pos_[t[0]], pos_[t[2]] - pos_[t[0]]);
  }

  std::vector<std::uint32_t> neighbours(std::uint32_t u) const {
    std::vector<std::uint32_t> out;
    for (std::uint32_t f : vf_[u]) {
      if (!face_alive_[f]) continue;
      for (std::uint32_t w : tri_[f]) {
        if (w != u) out.push_back(w);
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  void push(std::uint32_t u, std::uint32_t v) {
    const Quadric q = q_[u] + q_[v];
    Vec3 best = (pos_[u] + pos_[v]) * 0.5;
    double cost = q.error(best);
    Vec3 opt;
    const double span = length(pos_[u] - pos_[v]);
    if (q.minimizer(opt) && length(opt - best) <= 2.0 * span) {
      const double e = q.error(opt);
      if (e <= cost) {
        cost = e;
        best = opt;
      }
    }
    for (const Vec3& p : {pos_[u], pos_[v]}) {
      const double e = q.error(p);
      if (e < cost) {
        cost = e;
        best = p;
      }
    }
    heap_.push({std::max(0.0, cost), u, v, version_[u], version_[v], best});
  }

  bool within_budget(const Triangle& t, std::uint32_t moved, const Vec3& target) const {
    if (!cfg_.distance) return true;
    Vec3 p[3];
    for (int i = 0; i < 3; ++i) p[i] = t[i] == moved ? target : pos_[t[i]];
    for (const auto& b : kBudgetSamples) {
      const Vec3 x = p[0] * b[0] + p[1] * b[1] + p[2] * b[2];
      if (!(std::abs(cfg_.distance(x)) <= cfg_.max_distance)) return false;
    }
    return true;
  }

  void collapse_if_valid(const Candidate& c) {
    const std::uint32_t u = c.u, v = c.v;
    std::vector<std::uint32_t> shared;
    for (std::uint32_t f : vf_[u]) {
      if (!face_alive_[f]) continue;
      const auto& t = tri_[f];
      if (t[0] == v || t[1] == v || t[2] == v) shared.push_back(f);
    }
    if (shared.empty()) return;

    if (cfg_.preserve_topology) {
      if (shared.size() > 2) return;
      const auto nu = neighbours(u);
      const auto nv = neighbours(v);
      std::vector<std::uint32_t> common;
      std::set_intersection(nu.begin(), nu.end(), nv.begin(), nv.end(), std::back_inserter(common));
      if (common.size() != shared.size()) return;
      if (shared.size() == 2 && is_boundary_vertex(u) && is_boundary_vertex(v)) return;
      for (std::uint32_t w : common) {
        if (neighbours(w).size() <= 3) return;
      }
      if (nu.size() + nv.size() - common.size() - 2 < 3) return;
    }

    // Reject flips, slivers and budget violations among surviving faces.
    for (std::uint32_t x : {u, v}) {
      for (std::uint32_t f : vf_[x]) {
        if (!face_alive_[f]) continue;
        if (std::find(shared.begin(), shared.end(), f) != shared.end()) continue;
        const Triangle& t = tri_[f];
        const Vec3 before = face_cross(f, t);
        Vec3 p[3];
        for (int i = 0; i < 3; ++i) p[i] = t[i] == x ? c.target : pos_[t[i]];
        const Vec3 after = cross(p[1] - p[0], p[2] - p[0]);
        const double la = length(after), lb = length(before);
        if (!(la > 1e-14) || !(lb > 0.0)) return;
        if (dot(before, after) / (la * lb) < 0.05) return;
        if (!within_budget(t, x, c.target)) return;
      }
    }

    for (std::uint32_t f : shared) {
      face_alive_[f] = 0;
      --alive_faces_;
    }
    for (std::uint32_t f : vf_[v]) {
      if (!face_alive_[f]) continue;
      for (auto& i : tri_[f]) {
        if (i == v) i = u;
      }
      vf_[u].push_back(f);
    }
    vf_[v].clear();
    auto& list = vf_[u];
    list.erase(std::remove_if(list.begin(), list.end(), [&](std::uint32_t f) { return !face_alive_[f]; }),
               list.end());
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());

    pos_[u] = c.target;
    q_[u] += q_[v];
    vertex_alive_[v] = 0;
    ++version_[u];
    ++version_[v];
    for (std::uint32_t w : neighbours(u)) push(std::min(u, w), std::max(u, w));
  }

  bool is_boundary_vertex(std::uint32_t u) const {
    for (std::uint32_t w : neighbours(u)) {
      int count = 0;
      for (std::uint32_t f : vf_[u]) {
        if (!face_alive_[f]) continue;
        const auto& t = tri_[f];
        if (t[0] == w || t[1] == w || t[2] == w) ++count;
      }
      if (count == 1) return true;
    }
    return false;
  }

  const SimplifyConfig& cfg_;
  const TriMesh& mesh_;
  std::vector<Vec3> pos_;
  std::vector<Triangle> tri_;
  std::vector<char> face_alive_;
  std::vector<char> vertex_alive_;
  std::vector<std::uint32_t> version_;
  std::vector<std::vector<std::uint32_t>> vf_;
  std::vector<Quadric> q_;
  std::size_t alive_faces_ = 0;
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> heap_;
};

double measured_distance(const TriMesh& mesh, const SimplifyConfig& cfg) {
  if (!cfg.distance) return 0.0;
  double worst = 0.0;
  for (const auto& t : mesh.triangles) {
    for (const auto& b : kBudgetSamples) {
      const Vec3 x = mesh.positions[t[0]] * b[0] + mesh.positions[t[1]] * b[1] +
                     mesh.positions[t[2]] * b[2];
      worst = std::max(worst, std::abs(cfg.distance(x)));
    }
  }
  return worst;
}

}  // namespace

TriMesh simplify_qem(const TriMesh& mesh, const SimplifyConfig& cfg, SimplifyReport* report) {
  if (!(cfg.target_ratio > 0.0 && cfg.target_ratio <= 1.0)) {
    throw InvalidArgument("simplification ratio must lie in (0, 1]");
  }
  mesh.validate();
  const std::size_t input = mesh.triangle_count();
  const std::size_t target = std::max<std::size_t>(
      4, static_cast<std::size_t>(std::ceil(cfg.target_ratio * static_cast<double>(input) - 1e-9)));

  TriMesh out;
  if (target >= input) {
    out = mesh;
    out.uvs.clear();
  } else {
    Simplifier s(mesh, cfg);
    s.run(target);
    out = s.result();
    remove_degenerate_triangles(out);
  }
  if (report) {
    report->input_triangles = input;
    report->output_triangles = out.triangle_count();
    report->target_triangles = target;
    report->achieved_ratio = input ? static_cast<double>(out.triangle_count()) / input : 1.0;
    report->stopped_early = out.triangle_count() > target && target < input;
    report->max_measured_distance = measured_distance(out, cfg);
  }
  return out;
}

}  // namespace volsurf
