// SPDX-License-Identifier: Apache-2.0
#include "volsurf/fields/sdf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "volsurf/core/error.hpp"

namespace volsurf {
namespace {

struct Eval {
  double value = 0.0;
  Vec3 grad;
  bool clamped = false;
};

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double sign_of(double v) { return v < 0.0 ? -1.0 : 1.0; }

double grid_trilinear(const sdf::Grid& g, const Vec3& p, bool& clamped) {
  const Vec3 q = g.bounds.clamp(p);
  clamped = !(q == p);
  const Vec3 ext = g.bounds.extent();
  const double fx = (g.nx > 1 && ext.x > 0) ? (q.x - g.bounds.lo.x) / ext.x * (g.nx - 1) : 0.0;
  const double fy = (g.ny > 1 && ext.y > 0) ? (q.y - g.bounds.lo.y) / ext.y * (g.ny - 1) : 0.0;
  const double fz = (g.nz > 1 && ext.z > 0) ? (q.z - g.bounds.lo.z) / ext.z * (g.nz - 1) : 0.0;
  const int i0 = std::clamp(static_cast<int>(std::floor(fx)), 0, std::max(0, g.nx - 2));
  const int j0 = std::clamp(static_cast<int>(std::floor(fy)), 0, std::max(0, g.ny - 2));
  const int k0 = std::clamp(static_cast<int>(std::floor(fz)), 0, std::max(0, g.nz - 2));
  const int i1 = std::min(i0 + 1, g.nx - 1);
  const int j1 = std::min(j0 + 1, g.ny - 1);
  const int k1 = std::min(k0 + 1, g.nz - 1);
  const double tx = fx - i0, ty = fy - j0, tz = fz - k0;
  auto lerp1 = [](double a, double b, double t) { return a + (b - a) * t; };
  const double c00 = lerp1(g.node(i0, j0, k0), g.node(i1, j0, k0), tx);
  const double c10 = lerp1(g.node(i0, j1, k0), g.node(i1, j1, k0), tx);
  const double c01 = lerp1(g.node(i0, j0, k1), g.node(i1, j0, k1), tx);
  const double c11 = lerp1(g.node(i0, j1, k1), g.node(i1, j1, k1), tx);
  return lerp1(lerp1(c00, c10, ty), lerp1(c01, c11, ty), tz);
}

Eval evaluate(const sdf::Node& node, const Vec3& x, bool want_grad, double h);

Eval evaluate(const SdfField& f, const Vec3& x, bool want_grad, double h) {
  return evaluate(f.node(), x, want_grad, h);
}

Eval evaluate(const sdf::Node& node, const Vec3& x, bool want_grad, double h) {
  return std::visit(
      Overloaded{
          [&](const sdf::Sphere& s) {
            const Vec3 p = x - s.center;
            const double r = length(p);
            return Eval{r - s.radius, r > 0.0 ? p / r : Vec3{}, false};
          },
          [&](const sdf::Box& b) {
            const Vec3 p = x - b.center;
            const Vec3 q{std::abs(p.x) - b.half_extent.x, std::abs(p.y) - b.half_extent.y,
                         std::abs(p.z) - b.half_extent.z};
            const Vec3 qp = cwise_max(q, Vec3{});
            const double outside = length(qp);
            const double inside = std::min(std::max(q.x, std::max(q.y, q.z)), 0.0);
            Eval e{outside + inside, {}, false};
            if (outside > 0.0) {
              e.grad = Vec3{sign_of(p.x) * qp.x, sign_of(p.y) * qp.y, sign_of(p.z) * qp.z} / outside;
            } else {
              int axis = 0;
              if (q.y > q[axis]) axis = 1;
              if (q.z > q[axis]) axis = 2;
              e.grad[axis] = sign_of(p[axis]);
            }
            return e;
          },
          [&](const sdf::Torus& t) {
            const Vec3 p = x - t.center;
            const double rxz = std::hypot(p.x, p.z);
            const double qx = rxz - t.major_radius;
            const double qy = p.y;
            const double ql = std::hypot(qx, qy);
            Eval e{ql - t.minor_radius, {}, false};
            if (ql > 0.0 && rxz > 0.0) {
              const double dq = qx / ql;
              e.grad = Vec3{dq * p.x / rxz, qy / ql, dq * p.z / rxz};
            }
            return e;
          },
          [&](const sdf::Capsule& c) {
            const Vec3 pa = x - c.a;
            const Vec3 ba = c.b - c.a;
            const double bb = dot(ba, ba);
            const double t = bb > 0.0 ? std::clamp(dot(pa, ba) / bb, 0.0, 1.0) : 0.0;
            const Vec3 d = pa - ba * t;
            const double len = length(d);
            return Eval{len - c.radius, len > 0.0 ? d / len : Vec3{}, false};
          },
          [&](const sdf::Plane& p) { return Eval{dot(p.normal, x) - p.offset, p.normal, false}; },
          [&](const sdf::Union& u) {
            const Eval a = evaluate(*u.a, x, want_grad, h);
            const Eval b = evaluate(*u.b, x, want_grad, h);
            Eval r = a.value <= b.value ? a : b;
            r.clamped = a.clamped || b.clamped;
            return r;
          },
          [&](const sdf::Intersection& u) {
            const Eval a = evaluate(*u.a, x, want_grad, h);
            const Eval b = evaluate(*u.b, x, want_grad, h);
            Eval r = a.value >= b.value ? a : b;
            r.clamped = a.clamped || b.clamped;
            return r;
          },
          [&](const sdf::Subtraction& u) {
            const Eval a = evaluate(*u.a, x, want_grad, h);
            Eval nb = evaluate(*u.b, x, want_grad, h);
            nb.value = -nb.value;
            nb.grad = -nb.grad;
            Eval r = a.value >= nb.value ? a : nb;
            r.clamped = a.clamped || nb.clamped;
            return r;
          },
          [&](const sdf::SmoothUnion& u) {
            const Eval a = evaluate(*u.a, x, want_grad, h);
            const Eval b = evaluate(*u.b, x, want_grad, h);
            const double w = std::clamp(0.5 + 0.5 * (b.value - a.value) / u.k, 0.0, 1.0);
            // The derivative with respect to w vanishes, so the gradient blends linearly.
            return Eval{b.value + (a.value - b.value) * w - u.k * w * (1.0 - w),
                        a.grad * w + b.grad * (1.0 - w), a.clamped || b.clamped};
          },
          [&](const sdf::Offset& o) {
            Eval e = evaluate(*o.child, x, want_grad, h);
            e.value += o.amount;
            return e;
          },
          [&](const sdf::Scale& s) {
            Eval e = evaluate(*s.child, x, want_grad, h);
            e.value *= s.factor;
            e.grad *= s.factor;
            return e;
          },
          [&](const sdf::Grid& g) {
            Eval e;
            e.value = grid_trilinear(g, x, e.clamped);
            if (want_grad) {
              bool unused = false;
              for (int a = 0; a < 3; ++a) {
                Vec3 xp = x, xm = x;
                xp[a] += h;
                xm[a] -= h;
                e.grad[a] = (grid_trilinear(g, xp, unused) - grid_trilinear(g, xm, unused)) / (2 * h);
              }
            }
            return e;
          },
      },
      node);
}

Aabb bounds_of(const sdf::Node& node);
Aabb bounds_of(const SdfField& f) { return bounds_of(f.node()); }

Aabb bounds_of(const sdf::Node& node) {
  const double inf = std::numeric_limits<double>::infinity();
  const Aabb everything{{-inf, -inf, -inf}, {inf, inf, inf}};
  return std::visit(
      Overloaded{
          [](const sdf::Sphere& s) {
            const Vec3 r{s.radius, s.radius, s.radius};
            return Aabb{s.center - r, s.center + r};
          },
          [](const sdf::Box& b) { return Aabb{b.center - b.half_extent, b.center + b.half_extent}; },
          [](const sdf::Torus& t) {
            const double o = t.major_radius + t.minor_radius;
            return Aabb{t.center - Vec3{o, t.minor_radius, o}, t.center + Vec3{o, t.minor_radius, o}};
          },
          [](const sdf::Capsule& c) {
            const Vec3 r{c.radius, c.radius, c.radius};
            return Aabb{cwise_min(c.a, c.b) - r, cwise_max(c.a, c.b) + r};
          },
          [&](const sdf::Plane&) { return everything; },
          [](const sdf::Union& u) {
            Aabb b = bounds_of(*u.a);
            b.expand(bounds_of(*u.b));
            return b;
          },
          [](const sdf::Intersection& u) {
            const Aabb a = bounds_of(*u.a);
            const Aabb b = bounds_of(*u.b);
            return Aabb{cwise_max(a.lo, b.lo), cwise_min(a.hi, b.hi)};
          },
          [](const sdf::Subtraction& u) { return bounds_of(*u.a); },
          [](const sdf::SmoothUnion& u) {
            Aabb b = bounds_of(*u.a);
            b.expand(bounds_of(*u.b));
            const Vec3 pad{u.k, u.k, u.k};
            return Aabb{b.lo - pad, b.hi + pad};
          },
          [](const sdf::Offset& o) {
            const Aabb b = bounds_of(*o.child);
            const double pad = std::max(0.0, -o.amount);
            return Aabb{b.lo - Vec3{pad, pad, pad}, b.hi + Vec3{pad, pad, pad}};
          },
          [](const sdf::Scale& s) { return bounds_of(*s.child); },
          [](const sdf::Grid& g) { return g.bounds; },
      },
      node);
}

std::shared_ptr<const SdfField> share(const SdfField& f) { return std::make_shared<const SdfField>(f); }

}  // namespace

SdfField::SdfField(sdf::Node node) : node_(std::make_shared<const sdf::Node>(std::move(node))) {}

SdfField SdfField::sphere(const Vec3& center, double radius) {
  if (!(radius > 0.0)) throw InvalidArgument("sphere radius must be positive");
  return SdfField(sdf::Sphere{center, radius});
}

SdfField SdfField::box(const Vec3& center, const Vec3& half_extent) {
  if (!(half_extent.x > 0 && half_extent.y > 0 && half_extent.z > 0)) {
    throw InvalidArgument("box half extents must be positive");
  }
  return SdfField(sdf::Box{center, half_extent});
}

SdfField SdfField::torus(const Vec3& center, double major_radius, double minor_radius) {
  if (!(minor_radius > 0.0 && major_radius > minor_radius)) {
    throw InvalidArgument("torus needs major > minor > 0");
  }
  return SdfField(sdf::Torus{center, major_radius, minor_radius});
}

SdfField SdfField::capsule(const Vec3& a, const Vec3& b, double radius) {
  if (!(radius > 0.0)) throw InvalidArgument("capsule radius must be positive");
  return SdfField(sdf::Capsule{a, b, radius});
}

SdfField SdfField::plane(const Vec3& normal, double offset) {
  const double len = length(normal);
  if (!(len > 0.0)) throw InvalidArgument("plane normal must be non-zero");
  return SdfField(sdf::Plane{normal / len, offset / len});
}

SdfField SdfField::make_union(const SdfField& a, const SdfField& b) {
  return SdfField(sdf::Union{share(a), share(b)});
}

SdfField SdfField::make_intersection(const SdfField& a, const SdfField& b) {
  return SdfField(sdf::Intersection{share(a), share(b)});
}

SdfField SdfField::make_subtraction(const SdfField& a, const SdfField& b) {
  return SdfField(sdf::Subtraction{share(a), share(b)});
}

SdfField SdfField::smooth_union(const SdfField& a, const SdfField& b, double k) {
  if (!(k > 0.0)) throw InvalidArgument("smooth union radius must be positive");
  return SdfField(sdf::SmoothUnion{share(a), share(b), k});
}

SdfField SdfField::offset(const SdfField& child, double amount) {
  return SdfField(sdf::Offset{share(child), amount});
}

SdfField SdfField::scale(const SdfField& child, double factor) {
  return SdfField(sdf::Scale{share(child), factor});
}

SdfField SdfField::grid(const SdfField& source, const Aabb& bounds, int resolution) {
  if (resolution < 1) throw InvalidArgument("grid resolution must be at least 1");
  if (bounds.empty()) throw InvalidArgument("grid bounds are empty");
  const int n = resolution + 1;
  std::vector<double> values(static_cast<std::size_t>(n) * n * n);
  const Vec3 ext = bounds.extent();
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const Vec3 p = bounds.lo + Vec3{ext.x * i / (n - 1), ext.y * j / (n - 1), ext.z * k / (n - 1)};
        values[(static_cast<std::size_t>(k) * n + j) * n + i] = source.eval(p);
      }
    }
  }
  return grid(bounds, n, n, n, std::move(values));
}

SdfField SdfField::grid(const Aabb& bounds, int nx, int ny, int nz, std::vector<double> values) {
  if (nx < 2 || ny < 2 || nz < 2) throw InvalidArgument("grid needs at least 2 nodes per axis");
  if (values.size() != static_cast<std::size_t>(nx) * ny * nz) {
    throw InvalidArgument("grid value count " + std::to_string(values.size()) +
                          " does not match its dimensions");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidArgument("grid values must be finite");
  }
  return SdfField(sdf::Grid{bounds, nx, ny, nz, std::move(values)});
}

SdfSample SdfField::eval_checked(const Vec3& x) const {
  const Eval e = evaluate(*node_, x, false, 0.0);
  return {e.value, e.clamped};
}

Vec3 SdfField::gradient(const Vec3& x, double h) const {
  return evaluate(*node_, x, true, h > 0.0 ? h : default_gradient_step(*this)).grad;
}

Aabb SdfField::bounds() const { return bounds_of(*node_); }

double sdf_eval(const SdfField& field, const Vec3& x) { return field.eval(x); }

Vec3 sdf_gradient(const SdfField& field, const Vec3& x, double h) {
  if (!(h > 0.0)) throw InvalidArgument("gradient step must be positive");
  const Vec3 g = field.gradient(x, h);
  if (!(length(g) > 1e-12)) throw DegenerateNormalError("SDF gradient vanishes at query point");
  return g;
}

UnitVec3 sdf_normal(const SdfField& field, const Vec3& x, double h) {
  return UnitVec3(sdf_gradient(field, x, h));
}

double default_gradient_step(const SdfField& field) {
  if (const auto* g = std::get_if<sdf::Grid>(&field.node())) {
    const Vec3 ext = g->bounds.extent();
    return std::min({ext.x / (g->nx - 1), ext.y / (g->ny - 1), ext.z / (g->nz - 1)});
  }
  return 1e-4;
}

}  // namespace volsurf
