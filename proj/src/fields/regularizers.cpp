// SPDX-License-Identifier: Apache-2.0
#include "volsurf/fields/regularizers.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "volsurf/core/error.hpp"

namespace volsurf {

double eikonal_residual(const SdfField& field, std::span<const Vec3> points) {
  if (points.empty()) throw InvalidArgument("eikonal residual needs at least one point");
  const double h = default_gradient_step(field);
  double sum = 0.0;
  for (const Vec3& p : points) {
    const double g = length(field.gradient(p, h));
    sum += (g - 1.0) * (g - 1.0);
  }
  return sum / static_cast<double>(points.size());
}

double curvature_residual(const SdfField& field, std::span<const Vec3> points, double eps,
                          std::uint64_t seed) {
  if (points.empty()) throw InvalidArgument("curvature residual needs at least one point");
  if (!(eps > 0.0)) throw InvalidArgument("curvature step must be positive");
  const double h = default_gradient_step(field);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);

  double sum = 0.0;
  std::size_t used = 0;
  for (const Vec3& p : points) {
    const Vec3 g = field.gradient(p, h);
    const double gl = length(g);
    const double theta = angle(rng);
    if (!(gl > 1e-12)) continue;
    const Vec3 n = g / gl;
    const Vec3 helper = std::abs(n.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    const Vec3 t1 = cross(n, helper) / length(cross(n, helper));
    const Vec3 t2 = cross(n, t1);
    const Vec3 t = t1 * std::cos(theta) + t2 * std::sin(theta);
    const Vec3 g2 = field.gradient(p + t * eps, h);
    const double g2l = length(g2);
    if (!(g2l > 1e-12)) continue;
    sum += 1.0 - dot(n, g2 / g2l);
    ++used;
  }
  if (used == 0) throw DegenerateNormalError("every curvature sample had a degenerate normal");
  return sum / static_cast<double>(used);
}

}  // namespace volsurf
