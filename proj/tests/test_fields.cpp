// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <doctest.h>

#include "volsurf/core/error.hpp"
#include "volsurf/fields/kernels.hpp"
#include "volsurf/fields/ksdf.hpp"
#include "volsurf/fields/regularizers.hpp"
#include "volsurf/fields/scene.hpp"
#include "volsurf/fields/sdf.hpp"

using namespace volsurf;

namespace {

std::vector<Vec3> random_points(int n, double half, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-half, half);
  std::vector<Vec3> p(n);
  for (auto& x : p) x = {u(rng), u(rng), u(rng)};
  return p;
}

}  // namespace

TEST_CASE("sdf_eval: unit sphere center and outside point") {
  const SdfField s = SdfField::sphere({0, 0, 0}, 1.0);
  CHECK(sdf_eval(s, {0, 0, 0}) == -1.0);
  CHECK(sdf_eval(s, {2, 0, 0}) == 1.0);
}

TEST_CASE("sdf_eval: grid sphere matches analytic value") {
  const SdfField s = SdfField::sphere({0, 0, 0}, 0.5);
  const SdfField g = SdfField::grid(s, Aabb({-1, -1, -1}, {1, 1, 1}), 64);
  CHECK(std::abs(sdf_eval(g, {0.25, 0, 0}) + 0.25) < 1e-3);
}

TEST_CASE("sdf_eval: grid queries outside the box clamp and are flagged") {
  const SdfField g = SdfField::grid(SdfField::sphere({0, 0, 0}, 0.5), Aabb({-1, -1, -1}, {1, 1, 1}), 16);
  const SdfSample inside = g.eval_checked({0.1, 0, 0});
  const SdfSample outside = g.eval_checked({3, 0, 0});
  CHECK_FALSE(inside.clamped);
  CHECK(outside.clamped);
  CHECK(std::isfinite(outside.value));
}

TEST_CASE("sdf_gradient: radial directions on the unit sphere") {
  const SdfField s = SdfField::sphere({0, 0, 0}, 1.0);
  const Vec3 a = sdf_gradient(s, {2, 0, 0}, 1e-4);
  const Vec3 b = sdf_gradient(s, {0, 3, 0}, 1e-4);
  CHECK(length(a - Vec3(1, 0, 0)) < 1e-12);
  CHECK(length(b - Vec3(0, 1, 0)) < 1e-12);
}

TEST_CASE("sdf_gradient: sphere center is degenerate") {
  const SdfField s = SdfField::sphere({0, 0, 0}, 1.0);
  CHECK_THROWS_AS(sdf_gradient(s, {0, 0, 0}, 1e-4), DegenerateNormalError);
}

TEST_CASE("sdf_gradient: grid sphere norm near 1 close to the surface") {
  const SdfField s = SdfField::sphere({0, 0, 0}, 0.5);
  const SdfField g = SdfField::grid(s, Aabb({-1, -1, -1}, {1, 1, 1}), 64);
  const double h = default_gradient_step(g);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const Vec3 dir = UnitVec3(Vec3(nd(rng), nd(rng), nd(rng))).vec();
    const Vec3 x = dir * (0.5 + u(rng));
    worst = std::max(worst, std::abs(length(sdf_gradient(g, x, h)) - 1.0));
  }
  CHECK(worst < 2e-2);
}

TEST_CASE("sdf_gradient: analytic gradients match central differences") {
  const std::vector<SdfField> fields = {
      SdfField::sphere({0.1, 0, 0}, 0.7), SdfField::box({0, 0, 0}, {0.5, 0.4, 0.3}),
      SdfField::torus({0, 0, 0}, 0.6, 0.2), SdfField::capsule({-0.3, 0, 0}, {0.3, 0.2, 0}, 0.25),
      SdfField::smooth_union(SdfField::sphere({-0.3, 0, 0}, 0.4), SdfField::sphere({0.3, 0, 0}, 0.4), 0.2)};
  const double h = 1e-4;
  for (const SdfField& f : fields) {
    int checked = 0;
    for (const Vec3& x : random_points(400, 1.2, 11)) {
      const Vec3 g = f.gradient(x, h);
      Vec3 fd;
      for (int a = 0; a < 3; ++a) {
        Vec3 e;
        e[a] = h;
        fd[a] = (f.eval(x + e) - f.eval(x - e)) / (2 * h);
      }
      // Skip points near creases, where one-sided pieces differ.
      Vec3 fd2;
      for (int a = 0; a < 3; ++a) {
        Vec3 e;
        e[a] = 0.5 * h;
        fd2[a] = (f.eval(x + e) - f.eval(x - e)) / h;
      }
      if (length(fd - fd2) > 1e-7 || length(g) < 1e-3) continue;
      CHECK(length(g - fd) / length(g) < 1e-5);
      ++checked;
    }
    CHECK(checked > 300);
  }
}

TEST_CASE("ksdf_layer_distances: single inner offset adds its activation") {
  const KSdf k(SdfField::sphere({0, 0, 0}, 1.0), {OffsetField::constant(0.1, OffsetSign::inside)}, {},
               512.0);
  const auto d = ksdf_layer_distances(k, {2, 0, 0});
  REQUIRE(d.size() == 2);
  CHECK(d[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d[1] == doctest::Approx(1.1).epsilon(1e-12));
}

TEST_CASE("ksdf_layer_distances: outer and inner offsets by hand") {
  const KSdf k(SdfField::sphere({0, 0, 0}, 1.0), {OffsetField::constant(0.1, OffsetSign::inside)},
               {OffsetField::constant(0.05, OffsetSign::outside)}, 512.0);
  const auto d = ksdf_layer_distances(k, {2, 0, 0});
  REQUIRE(d.size() == 3);
  CHECK(d[0] == doctest::Approx(0.95).epsilon(1e-12));
  CHECK(d[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d[2] == doctest::Approx(1.1).epsilon(1e-12));
}

TEST_CASE("ksdf_layer_distances: cumulative sum of raw activations") {
  // softplus(raw) = y  <=>  raw = log(e^y - 1), computed here independently.
  const double r1 = std::log(std::exp(0.1) - 1.0);
  const double r2 = std::log(std::exp(0.2) - 1.0);
  const KSdf k(SdfField::sphere({0, 0, 0}, 1.0),
               {OffsetField::from_raw(r1, OffsetSign::inside), OffsetField::from_raw(r2, OffsetSign::inside)},
               {}, 512.0);
  const auto d = ksdf_layer_distances(k, {1, 0, 0});
  REQUIRE(d.size() == 3);
  CHECK(std::abs(d[0]) < 1e-15);
  CHECK(d[1] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(d[2] == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("KSdf: k outside [1,9] is rejected") {
  std::vector<OffsetField> nine(9, OffsetField::constant(0.01, OffsetSign::inside));
  CHECK_THROWS_WITH_AS(KSdf(SdfField::sphere({0, 0, 0}, 1.0), nine, {}, 512.0),
                       doctest::Contains("k must be in [1,9]"), InvalidArgument);
}

TEST_CASE("shell nesting: adjacent layers differ by the activated offset everywhere") {
  OffsetField mod = OffsetField::from_raw(-3.0, OffsetSign::outside);
  mod.modulation = {0.0, 0.3, 0.6, -0.2};
  const KSdf k(SdfField::torus({0, 0, 0}, 0.6, 0.28),
               {OffsetField::from_raw(-4.0, OffsetSign::inside), OffsetField::from_raw(-5.0, OffsetSign::inside)},
               {mod}, 512.0);
  for (const Vec3& x : random_points(2000, 1.5, 5)) {
    const auto d = k.layer_distances(x);
    CHECK(d[0] < d[1]);
    CHECK(d[1] < d[2]);
    CHECK(d[2] < d[3]);
    CHECK(d[1] - d[0] == doctest::Approx(mod.activated(x)).epsilon(1e-9));
    CHECK(d[2] - d[1] == doctest::Approx(softplus(-4.0)).epsilon(1e-9));
  }
}

TEST_CASE("softplus: activated offsets stay positive for very negative raw values") {
  for (double raw = -30.0; raw <= 40.0; raw += 0.5) {
    CHECK(OffsetField::from_raw(raw, OffsetSign::inside).activated({1, 0, 0}) > 0.0);
  }
  CHECK(softplus(25.0) == 25.0);
}

TEST_CASE("logistic_density: mode, tails and symmetry") {
  CHECK(logistic_density(4.0, 0.0) == 1.0);
  const double tail = logistic_density(100.0, 1.0);
  CHECK(std::isfinite(tail));
  CHECK(tail < 1e-40);
  CHECK(std::isfinite(logistic_density(1e4, 1.0)));
  for (double d : {0.001, 0.01, 0.1, 1.0}) {
    CHECK(logistic_density(300.0, d) == logistic_density(300.0, -d));
    CHECK(logistic_density(300.0, d) < 300.0 / 4.0);
  }
}

TEST_CASE("logistic_density: integrates to one over ten scale lengths") {
  // Composite Simpson on [-10/beta, 10/beta]; the truncated tails carry
  // 2 / (1 + e^10) of the mass, about 9e-5, so compare against the analytic
  // CDF difference as well as 1.
  for (double beta : {30.0, 512.0, 4096.0}) {
    const int n = 20000;
    const double a = -10.0 / beta, b = 10.0 / beta, h = (b - a) / n;
    double s = logistic_density(beta, a) + logistic_density(beta, b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * logistic_density(beta, a + i * h);
    s *= h / 3.0;
    const double cdf = 1.0 / (1.0 + std::exp(-10.0)) - 1.0 / (1.0 + std::exp(10.0));
    CHECK(std::abs(s - cdf) < 1e-6);
  }
  // Whole-line integral: extend far enough that the tails are negligible.
  const double beta = 512.0;
  const int n = 200000;
  const double a = -60.0 / beta, b = 60.0 / beta, h = (b - a) / n;
  double s = logistic_density(beta, a) + logistic_density(beta, b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * logistic_density(beta, a + i * h);
  CHECK(std::abs(s * h / 3.0 - 1.0) < 1e-6);
}

TEST_CASE("delta_o_init: closed form values") {
  CHECK(delta_o_init(std::numbers::pi / std::sqrt(3.0)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(delta_o_init(30.0) == doctest::Approx(0.0604599788).epsilon(1e-9));
  double prev = delta_o_init(1.0);
  for (double beta = 2.0; beta < 1e7; beta *= 3.0) {
    const double v = delta_o_init(beta);
    CHECK(v < prev);
    prev = v;
  }
  CHECK(prev < 1e-6);
}

TEST_CASE("eikonal_residual: exact, scaled and grid fields") {
  const SdfField s = SdfField::sphere({0, 0, 0}, 0.5);
  const auto pts = random_points(1000, 0.9, 9);
  CHECK(eikonal_residual(s, pts) < 1e-10);
  CHECK(eikonal_residual(SdfField::scale(s, 2.0), pts) == doctest::Approx(1.0).epsilon(1e-9));
  const SdfField g = SdfField::grid(s, Aabb({-1, -1, -1}, {1, 1, 1}), 64);
  CHECK(eikonal_residual(g, pts) < 1e-2);
}

TEST_CASE("curvature_residual: plane, sphere scaling and box edges") {
  const SdfField plane = SdfField::plane({0, 0, 1}, 0.0);
  const auto flat = random_points(200, 1.0, 2);
  std::vector<Vec3> on_plane;
  for (const Vec3& p : flat) on_plane.push_back({p.x, p.y, 0.0});
  CHECK(curvature_residual(plane, on_plane, 1e-2) < 1e-10);

  const double eps = 1e-3;
  double prev = 1e9;
  for (double r : {0.25, 0.5, 1.0}) {
    const SdfField s = SdfField::sphere({0, 0, 0}, r);
    std::vector<Vec3> pts;
    for (const Vec3& p : random_points(200, 1.0, 4)) {
      if (length(p) > 1e-3) pts.push_back(p / length(p) * r);
    }
    const double c = curvature_residual(s, pts, eps);
    CHECK(c == doctest::Approx(eps * eps / (2 * r * r)).epsilon(0.05));
    CHECK(c < prev);
    prev = c;
  }

  const SdfField box = SdfField::box({0, 0, 0}, {0.5, 0.5, 0.5});
  std::vector<Vec3> face, edge;
  for (int i = 0; i < 50; ++i) {
    const double t = -0.3 + 0.6 * i / 49.0;
    face.push_back({t, 0.1, 0.5});
    edge.push_back({t, 0.5, 0.5});
  }
  CHECK(curvature_residual(box, edge, 0.05) > curvature_residual(box, face, 0.05));
}

TEST_CASE("scene: canonical scenes round-trip through json") {
  for (const std::string& name : canonical_scene_names()) {
    for (int k : {1, 3, 5}) {
      const Scene s = make_canonical_scene(name, k);
      CHECK(s.ksdf.k() == k);
      const std::string text = scene_to_json(s);
      CHECK(scene_to_json(scene_from_json(text)) == text);
    }
  }
}

TEST_CASE("scene: fuzzy sphere inner offsets sit at the initial spacing") {
  const Scene s = make_canonical_scene("fuzzy-sphere", 3, 512.0);
  REQUIRE(s.ksdf.inner_offsets().size() == 2);
  CHECK(s.ksdf.outer_offsets().empty());
  for (const auto& o : s.ksdf.inner_offsets()) {
    CHECK(o.activated({1, 0, 0}) == doctest::Approx(std::numbers::pi / (std::sqrt(3.0) * 512.0)).epsilon(1e-9));
  }
}

TEST_CASE("scene: malformed files name the failing field") {
  CHECK_THROWS_WITH_AS(scene_from_json("{\"format\":\"volsurf-scene\",\"version\":1}"),
                       doctest::Contains("scene."), FormatError);
  CHECK_THROWS_AS(scene_from_json("{\"format\":\"volsurf-scene\",\"version\":99}"), VersionError);
  CHECK_THROWS_AS(make_canonical_scene("nope", 3), InvalidArgument);
  CHECK_THROWS_WITH(make_canonical_scene("fuzzy-sphere", 12), doctest::Contains("k must be in [1,9]"));
}
