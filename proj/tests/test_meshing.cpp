// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <vector>

#include <doctest.h>

#include "volsurf/core/error.hpp"
#include "volsurf/fields/ksdf.hpp"
#include "volsurf/fields/scene.hpp"
#include "volsurf/meshing/atlas.hpp"
#include "volsurf/meshing/marching_cubes.hpp"
#include "volsurf/meshing/mesh_io.hpp"
#include "volsurf/meshing/shells.hpp"
#include "volsurf/meshing/simplify.hpp"
#include "volsurf/shellrender/bvh.hpp"

using namespace volsurf;

namespace {

const Aabb kUnitBox({-1, -1, -1}, {1, 1, 1});

TriMesh sphere_mesh(int res = 64, double r = 0.5) {
  return marching_cubes(SdfField::sphere({0, 0, 0}, r), kUnitBox, res);
}

TriMesh torus_mesh(int res = 64) {
  return marching_cubes(SdfField::torus({0, 0, 0}, 0.6, 0.25), kUnitBox, res);
}

// Barycentric coordinates of p in the 2D triangle (a, b, c).
std::array<double, 3> barycentric2(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
  const double den = cross2(b - a, c - a);
  const double l1 = cross2(p - a, c - a) / den;
  const double l2 = cross2(b - a, p - a) / den;
  return {1.0 - l1 - l2, l1, l2};
}

std::vector<Vec3> surface_samples(const TriMesh& m, int per_triangle, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> out;
  for (const Triangle& t : m.triangles) {
    for (int s = 0; s < per_triangle; ++s) {
      double a = u(rng), b = u(rng);
      if (a + b > 1.0) {
        a = 1.0 - a;
        b = 1.0 - b;
      }
      out.push_back(m.positions[t[0]] * (1.0 - a - b) + m.positions[t[1]] * a + m.positions[t[2]] * b);
    }
    out.push_back((m.positions[t[0]] + m.positions[t[1]] + m.positions[t[2]]) / 3.0);
  }
  return out;
}

}  // namespace

TEST_CASE("marching_cubes: sphere residual and closed genus-zero surface") {
  const TriMesh m = sphere_mesh();
  const double diag = std::sqrt(3.0) * 2.0 / 64.0;
  for (const Vec3& p : m.positions) CHECK(std::abs(length(p) - 0.5) < diag);
  const MeshTopology topo = analyze_topology(m);
  CHECK(topo.closed_manifold());
  CHECK(topo.components == 1);
  CHECK(topo.euler_characteristic() == 2);
}

TEST_CASE("marching_cubes: plane vertices are exact") {
  const TriMesh m = marching_cubes(SdfField::plane({0, 0, 1}, 0.0137), kUnitBox, 16);
  REQUIRE(m.vertex_count() > 0);
  for (const Vec3& p : m.positions) CHECK(std::abs(p.z - 0.0137) < 1e-6);
}

TEST_CASE("marching_cubes: torus has Euler characteristic zero") {
  const MeshTopology topo = analyze_topology(torus_mesh());
  CHECK(topo.closed_manifold());
  CHECK(topo.euler_characteristic() == 0);
}

TEST_CASE("marching_cubes: normals follow the gradient and triangles wind outward") {
  const TriMesh m = sphere_mesh(32);
  for (std::size_t v = 0; v < m.vertex_count(); ++v) {
    CHECK(dot(m.normals[v].vec(), m.positions[v] / length(m.positions[v])) > 0.999);
  }
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    const Triangle& tri = m.triangles[t];
    const Vec3 c = (m.positions[tri[0]] + m.positions[tri[1]] + m.positions[tri[2]]) / 3.0;
    CHECK(dot(m.face_cross(t), c) > 0.0);
  }
}

TEST_CASE("marching_cubes: every layer of every canonical scene is a closed manifold") {
  // Tight offsets put crossings within a hair of grid nodes; those must not
  // leave cracks.
  for (const std::string& name : canonical_scene_names()) {
    for (int k : {3, 9}) {
      const Scene s = make_canonical_scene(name, k, 64.0);
      for (int res : {64, 96}) {
        for (int j = 0; j < s.ksdf.k(); ++j) {
          const ScalarField f{[&](const Vec3& p) { return s.ksdf.layer_distance(j, p); }, {}};
          const MeshTopology topo = analyze_topology(marching_cubes(f, s.bounds, res));
          INFO(name << " k " << k << " res " << res << " layer " << j);
          CHECK(topo.closed_manifold());
        }
      }
    }
  }
}

TEST_CASE("marching_cubes: errors") {
  CHECK_THROWS_AS(marching_cubes(SdfField::sphere({5, 5, 5}, 0.5), kUnitBox, 16), EmptyMeshError);
  CHECK_THROWS_AS(marching_cubes(SdfField::sphere({0, 0, 0}, 0.5), kUnitBox, 7), InvalidArgument);
}

TEST_CASE("simplify_qem: ratio one keeps the mesh") {
  const TriMesh m = sphere_mesh(24);
  SimplifyReport rep;
  const TriMesh s = simplify_qem(m, {.target_ratio = 1.0}, &rep);
  CHECK(s.triangle_count() == m.triangle_count());
  CHECK(s.vertex_count() == m.vertex_count());
  CHECK_FALSE(rep.stopped_early);
}

TEST_CASE("simplify_qem: sphere at 2% stays within 2% of the radius") {
  // 64 cells across the sphere's bounds padded by 10% per side.
  const TriMesh m = marching_cubes(SdfField::sphere({0, 0, 0}, 0.5), Aabb({-0.55, -0.55, -0.55}, {0.55, 0.55, 0.55}), 64);
  SimplifyReport rep;
  const TriMesh s = simplify_qem(m, {.target_ratio = 0.02}, &rep);
  CHECK(s.triangle_count() <= static_cast<std::size_t>(std::ceil(0.02 * m.triangle_count())));
  CHECK(s.triangle_count() >= 4);
  double hausdorff = 0.0;
  for (const Vec3& p : surface_samples(s, 64, 3)) hausdorff = std::max(hausdorff, std::abs(length(p) - 0.5));
  MESSAGE("one-sided Hausdorff / radius = " << hausdorff / 0.5);
  CHECK(hausdorff < 0.02 * 0.5);
  const MeshTopology topo = analyze_topology(s);
  CHECK(topo.closed_manifold());
  CHECK(topo.euler_characteristic() == 2);
}

TEST_CASE("simplify_qem: infeasible ratio on a torus stops early with its genus") {
  const TriMesh m = torus_mesh(32);
  SimplifyReport rep;
  const TriMesh s = simplify_qem(m, {.target_ratio = 1e-4, .preserve_topology = true}, &rep);
  CHECK(rep.stopped_early);
  CHECK(rep.achieved_ratio > 1e-4);
  CHECK(rep.achieved_ratio == doctest::Approx(double(s.triangle_count()) / m.triangle_count()));
  const MeshTopology topo = analyze_topology(s);
  CHECK(topo.closed_manifold());
  CHECK(topo.euler_characteristic() == 0);
}

TEST_CASE("simplify_qem: geometric budget bounds the measured deviation") {
  const TriMesh m = sphere_mesh(48);
  SimplifyConfig cfg{.target_ratio = 0.01};
  cfg.distance = [](const Vec3& p) { return length(p) - 0.5; };
  cfg.max_distance = 0.004;
  SimplifyReport rep;
  const TriMesh s = simplify_qem(m, cfg, &rep);
  CHECK(rep.max_measured_distance <= 0.004);
  double worst = 0.0;
  for (const Vec3& p : surface_samples(s, 1, 8)) worst = std::max(worst, std::abs(length(p) - 0.5));
  CHECK(worst <= 0.004 + 1e-12);
}

TEST_CASE("generate_uv_atlas: a single quad is one chart scaled by its texel density") {
  TriMesh quad;
  quad.positions = {{0, 0, 0}, {2, 0, 0}, {2, 1, 0}, {0, 1, 0}};
  quad.triangles = {{0, 1, 2}, {0, 2, 3}};
  AtlasReport rep;
  const TriMesh a = generate_uv_atlas(quad, {.resolution = 64, .gutter = 1}, &rep);
  CHECK(rep.charts == 1);
  double uv_area = 0.0;
  for (const Triangle& t : a.triangles) {
    uv_area += 0.5 * std::abs(cross2(a.uvs[t[1]] - a.uvs[t[0]], a.uvs[t[2]] - a.uvs[t[0]]));
  }
  const double scale = rep.texels_per_unit / 64.0;
  CHECK(uv_area == doctest::Approx(2.0 * scale * scale).epsilon(1e-9));
  CHECK(uv_area > 0.3);
  for (const Vec2& uv : a.uvs) {
    CHECK(uv.x >= 0.0);
    CHECK(uv.x <= 1.0);
    CHECK(uv.y >= 0.0);
    CHECK(uv.y <= 1.0);
  }
}

TEST_CASE("generate_uv_atlas: sphere coverage, disjoint charts and positive areas") {
  const int R = 256;
  const TriMesh s = simplify_qem(sphere_mesh(), {.target_ratio = 0.05});
  AtlasReport rep;
  const TriMesh a = generate_uv_atlas(s, {.resolution = R, .gutter = 2}, &rep);
  const std::vector<int> chart = uv_chart_ids(a);
  CHECK(rep.charts > 1);

  // Rasterize triangles at texel centers; a texel claimed by two charts is an overlap.
  std::vector<int> owner(R * R, -1);
  int overlaps = 0, covered = 0;
  for (std::size_t t = 0; t < a.triangle_count(); ++t) {
    const Vec2 p0 = a.uvs[a.triangles[t][0]] * R, p1 = a.uvs[a.triangles[t][1]] * R,
               p2 = a.uvs[a.triangles[t][2]] * R;
    CHECK(std::abs(cross2(p1 - p0, p2 - p0)) > 0.0);
    const int x0 = std::max(0, int(std::floor(std::min({p0.x, p1.x, p2.x}))));
    const int x1 = std::min(R - 1, int(std::ceil(std::max({p0.x, p1.x, p2.x}))));
    const int y0 = std::max(0, int(std::floor(std::min({p0.y, p1.y, p2.y}))));
    const int y1 = std::min(R - 1, int(std::ceil(std::max({p0.y, p1.y, p2.y}))));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const auto b = barycentric2({x + 0.5, y + 0.5}, p0, p1, p2);
        if (b[0] < 0 || b[1] < 0 || b[2] < 0) continue;
        int& o = owner[y * R + x];
        if (o == -1) {
          o = chart[t];
          ++covered;
        } else if (o != chart[t]) {
          ++overlaps;
        }
      }
    }
  }
  MESSAGE("coverage " << double(covered) / (R * R) << " charts " << rep.charts);
  CHECK(overlaps == 0);
  CHECK(covered >= 0.4 * R * R);

  // Chart rectangles, grown by the gutter, never intersect.
  std::map<int, Aabb> boxes;
  for (std::size_t t = 0; t < a.triangle_count(); ++t) {
    for (int c = 0; c < 3; ++c) {
      const Vec2 uv = a.uvs[a.triangles[t][c]] * R;
      boxes[chart[t]].expand(Vec3(uv.x, uv.y, 0));
    }
  }
  for (auto i = boxes.begin(); i != boxes.end(); ++i) {
    for (auto j = std::next(i); j != boxes.end(); ++j) {
      const Aabb& p = i->second;
      const Aabb& q = j->second;
      const bool apart = p.hi.x + 1.0 <= q.lo.x || q.hi.x + 1.0 <= p.lo.x || p.hi.y + 1.0 <= q.lo.y ||
                         q.hi.y + 1.0 <= p.lo.y;
      CHECK(apart);
    }
  }
}

TEST_CASE("generate_uv_atlas: UV to 3D to UV round trip within half a texel") {
  const int R = 128;
  for (const TriMesh& src : {simplify_qem(sphere_mesh(48), {.target_ratio = 0.05}),
                             simplify_qem(torus_mesh(48), {.target_ratio = 0.05})}) {
    const TriMesh a = generate_uv_atlas(src, {.resolution = R, .gutter = 1});
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.05, 0.9);
    std::uniform_int_distribution<std::size_t> pick(0, a.triangle_count() - 1);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
      const std::size_t t0 = pick(rng);
      double b1 = u(rng), b2 = u(rng);
      if (b1 + b2 > 0.95) {
        const double f = 0.95 / (b1 + b2);
        b1 *= f;
        b2 *= f;
      }
      const Triangle& tr = a.triangles[t0];
      const Vec2 uv = a.uvs[tr[0]] * (1 - b1 - b2) + a.uvs[tr[1]] * b1 + a.uvs[tr[2]] * b2;
      // UV -> 3D: locate the containing triangle by scanning the atlas.
      Vec3 p;
      bool found = false;
      for (const Triangle& q : a.triangles) {
        const auto b = barycentric2(uv, a.uvs[q[0]], a.uvs[q[1]], a.uvs[q[2]]);
        if (b[0] < -1e-12 || b[1] < -1e-12 || b[2] < -1e-12) continue;
        p = a.positions[q[0]] * b[0] + a.positions[q[1]] * b[1] + a.positions[q[2]] * b[2];
        found = true;
        break;
      }
      REQUIRE(found);
      // 3D -> UV: the triangle containing p in 3D.
      double best = 1e30;
      Vec2 back;
      for (const Triangle& q : a.triangles) {
        const Vec3 e1 = a.positions[q[1]] - a.positions[q[0]], e2 = a.positions[q[2]] - a.positions[q[0]];
        const Vec3 n = cross(e1, e2);
        const Vec3 r = p - a.positions[q[0]];
        const double dist = std::abs(dot(r, n)) / length(n);
        const double l1 = dot(cross(r, e2), n) / dot(n, n);
        const double l2 = dot(cross(e1, r), n) / dot(n, n);
        if (l1 < -1e-9 || l2 < -1e-9 || l1 + l2 > 1 + 1e-9 || dist >= best) continue;
        best = dist;
        back = a.uvs[q[0]] * (1 - l1 - l2) + a.uvs[q[1]] * l1 + a.uvs[q[2]] * l2;
      }
      REQUIRE(best < 1e-9);
      worst = std::max(worst, std::hypot(back.x - uv.x, back.y - uv.y) * R);
    }
    CHECK(worst <= 0.5);
  }
}

TEST_CASE("extract_shells: three-shell sphere is nested and ordered outermost first") {
  const Scene s = make_canonical_scene("fuzzy-sphere", 3, 64.0);
  const ShellSet set = extract_shells(s.ksdf, s.bounds, 64, {.target_ratio = 0.05}, {.resolution = 128});
  REQUIRE(set.k() == 3);
  double prev = 1e9;
  for (int j = 0; j < 3; ++j) {
    CHECK(set.shells[j].layer_index == j);
    CHECK(set.shells[j].has_uvs());
    double r = 0.0;
    for (const Vec3& p : set.shells[j].positions) r = std::max(r, length(p));
    CHECK(r < prev);
    prev = r;
  }
}

TEST_CASE("extract_shells: k=1 equals marching cubes, simplify and atlas in sequence") {
  const KSdf k(SdfField::sphere({0, 0, 0}, 0.5), {}, {}, 4096.0);
  const SimplifyConfig sc{.target_ratio = 0.05};
  const AtlasConfig ac{.resolution = 128};
  const ShellSet set = extract_shells(k, kUnitBox, 48, sc, ac);
  REQUIRE(set.k() == 1);
  const TriMesh manual = generate_uv_atlas(simplify_qem(marching_cubes(k.main(), kUnitBox, 48), sc), ac);
  const TriMesh& got = set.shells[0];
  CHECK(got.positions == manual.positions);
  CHECK(got.triangles == manual.triangles);
  CHECK(got.uvs == manual.uvs);
  for (std::size_t v = 0; v < got.vertex_count(); ++v) {
    CHECK(dot(got.normals[v].vec(), got.positions[v] / length(got.positions[v])) == doctest::Approx(1.0));
  }
}

TEST_CASE("extract_shells: ray order survives baking on every canonical scene") {
  for (const std::string& name : canonical_scene_names()) {
    const Scene s = make_canonical_scene(name, 3, 64.0);
    const ShellSet set = extract_shells(s.ksdf, s.bounds, 64, {.target_ratio = 0.05}, {.resolution = 64});
    std::vector<Bvh> bvhs;
    for (const TriMesh& m : set.shells) bvhs.emplace_back(m);
    std::mt19937_64 rng(99);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> u(-0.4, 0.4);
    int all_hit = 0, violations = 0;
    for (int i = 0; i < 10000; ++i) {
      const Vec3 dir = UnitVec3(Vec3(nd(rng), nd(rng), nd(rng))).vec();
      Ray r;
      r.origin = dir * 3.0;
      r.direction = UnitVec3(Vec3(u(rng), u(rng), u(rng)) - r.origin);
      std::vector<double> t;
      for (const Bvh& b : bvhs) {
        const auto h = b.closest(r);
        if (!h) break;
        t.push_back(h->t);
      }
      if (t.size() != bvhs.size()) continue;
      ++all_hit;
      for (std::size_t j = 1; j < t.size(); ++j) violations += !(t[j] > t[j - 1]);
    }
    INFO(name);
    CHECK(all_hit > 1000);
    CHECK(violations == 0);
  }
}

TEST_CASE("extract_shells: empty layer is named") {
  const KSdf k(SdfField::sphere({0, 0, 0}, 0.5), {OffsetField::constant(0.6, OffsetSign::inside)}, {}, 512.0);
  CHECK_THROWS_WITH_AS(extract_shells(k, kUnitBox, 16, {}, {}), doctest::Contains("layer 1"), EmptyMeshError);
}

TEST_CASE("mesh_io: OBJ and PLY round trips are exact") {
  TriMesh m = generate_uv_atlas(simplify_qem(sphere_mesh(24), {.target_ratio = 0.1}), {.resolution = 64});
  m.normals = face_averaged_normals(m);
  const TriMesh o = obj_from_string(obj_to_string(m));
  CHECK(o.positions == m.positions);
  CHECK(o.uvs == m.uvs);
  CHECK(o.triangles == m.triangles);
  REQUIRE(o.normals.size() == m.normals.size());
  for (std::size_t i = 0; i < m.normals.size(); ++i) CHECK(o.normals[i].vec() == m.normals[i].vec());

  const auto dir = std::filesystem::temp_directory_path() / "volsurf_mesh_io_test";
  std::filesystem::create_directories(dir);
  write_ply(dir / "m.ply", m);
  const TriMesh p = read_ply(dir / "m.ply");
  CHECK(p.positions == m.positions);
  CHECK(p.uvs == m.uvs);
  CHECK(p.triangles == m.triangles);
  for (std::size_t i = 0; i < m.normals.size(); ++i) CHECK(p.normals[i].vec() == m.normals[i].vec());
  write_obj(dir / "m.obj", m);
  CHECK(read_obj(dir / "m.obj").positions == m.positions);
  std::filesystem::remove_all(dir);
}

TEST_CASE("mesh_io: malformed OBJ is rejected") {
  CHECK_THROWS_AS(obj_from_string("v 0 0 0\nf 1 2 3\n"), FormatError);
  CHECK_THROWS_AS(obj_from_string("v 0 0 zero\n"), FormatError);
}

TEST_CASE("remove_degenerate_triangles: drops zero-area and repeated-index faces") {
  TriMesh m;
  m.positions = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {2, 0, 0}, {5, 5, 5}};
  m.triangles = {{0, 1, 2}, {0, 1, 3}, {0, 0, 2}};
  CHECK(remove_degenerate_triangles(m) == 2);
  CHECK(m.triangle_count() == 1);
  CHECK(m.vertex_count() == 3);
}
