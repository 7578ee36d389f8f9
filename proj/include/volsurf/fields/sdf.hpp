// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <variant>
#include <vector>

#include "volsurf/core/vec.hpp"

namespace volsurf {

class SdfField;

namespace sdf {

struct Sphere {
  Vec3 center;
  double radius = 1.0;
};
struct Box {
  Vec3 center;
  Vec3 half_extent{1.0, 1.0, 1.0};
};
/// Ring in the plane y = center.y, around the y axis.
struct Torus {
  Vec3 center;
  double major_radius = 1.0;
  double minor_radius = 0.25;
};
struct Capsule {
  Vec3 a;
  Vec3 b;
  double radius = 0.5;
};
/// Half-space dot(normal, x) - offset <= 0; normal is unit length.
struct Plane {
  Vec3 normal{0.0, 0.0, 1.0};
  double offset = 0.0;
};

struct Union {
  std::shared_ptr<const SdfField> a, b;
};
struct Intersection {
  std::shared_ptr<const SdfField> a, b;
};
/// a minus b.
struct Subtraction {
  std::shared_ptr<const SdfField> a, b;
};
/// Polynomial smooth minimum with blend radius k.
struct SmoothUnion {
  std::shared_ptr<const SdfField> a, b;
  double k = 0.1;
};
/// child(x) + amount.
struct Offset {
  std::shared_ptr<const SdfField> child;
  double amount = 0.0;
};
/// factor * child(x). Not a distance field unless factor is 1.
struct Scale {
  std::shared_ptr<const SdfField> child;
  double factor = 1.0;
};
/// Node values on a regular lattice spanning `bounds`, trilinearly interpolated.
struct Grid {
  Aabb bounds;
  int nx = 0, ny = 0, nz = 0;
  std::vector<double> values;  // x fastest

  double node(int i, int j, int k) const {
    return values[(static_cast<std::size_t>(k) * ny + j) * nx + i];
  }
};

using Node = std::variant<Sphere, Box, Torus, Capsule, Plane, Union, Intersection, Subtraction,
                          SmoothUnion, Offset, Scale, Grid>;

}  // namespace sdf

/// Result of a field query together with whether a grid lookup had to clamp
/// the point into its bounding box.
struct SdfSample {
  double value = 0.0;
  bool clamped = false;
};

/// Immutable signed-distance field: negative inside, positive outside.
/// Copies share the underlying node tree.
class SdfField {
 public:
  explicit SdfField(sdf::Node node);

  static SdfField sphere(const Vec3& center, double radius);
  static SdfField box(const Vec3& center, const Vec3& half_extent);
  static SdfField torus(const Vec3& center, double major_radius, double minor_radius);
  static SdfField capsule(const Vec3& a, const Vec3& b, double radius);
  static SdfField plane(const Vec3& normal, double offset);
  static SdfField make_union(const SdfField& a, const SdfField& b);
  static SdfField make_intersection(const SdfField& a, const SdfField& b);
  static SdfField make_subtraction(const SdfField& a, const SdfField& b);
  static SdfField smooth_union(const SdfField& a, const SdfField& b, double k);
  static SdfField offset(const SdfField& child, double amount);
  static SdfField scale(const SdfField& child, double factor);
  /// Samples `source` at the nodes of a lattice with `resolution` cells per
  /// axis over `bounds`.
  static SdfField grid(const SdfField& source, const Aabb& bounds, int resolution);
  static SdfField grid(const Aabb& bounds, int nx, int ny, int nz, std::vector<double> values);

  const sdf::Node& node() const { return *node_; }
  bool is_grid() const { return std::holds_alternative<sdf::Grid>(*node_); }

  double eval(const Vec3& x) const { return eval_checked(x).value; }
  SdfSample eval_checked(const Vec3& x) const;

  /// Gradient; closed form for analytic nodes, central differences of step h
  /// for grids. May be the zero vector at singular points.
  Vec3 gradient(const Vec3& x, double h) const;

  /// Conservative bound of the region where the surface lives, if known.
  Aabb bounds() const;

 private:
  std::shared_ptr<const sdf::Node> node_;
};

/// Signed distance at x.
double sdf_eval(const SdfField& field, const Vec3& x);

/// Gradient of the field at x; throws DegenerateNormalError if it vanishes.
Vec3 sdf_gradient(const SdfField& field, const Vec3& x, double h);

/// Normalized gradient; throws DegenerateNormalError if it vanishes.
UnitVec3 sdf_normal(const SdfField& field, const Vec3& x, double h);

/// Default step for finite differences on grid fields: one lattice cell.
double default_gradient_step(const SdfField& field);

}  // namespace volsurf
