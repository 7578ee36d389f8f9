// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <limits>
#include <type_traits>
#include <variant>

#include "volsurf/core/error.hpp"
#include "volsurf/core/parallel.hpp"
#include "volsurf/fields/kernels.hpp"
#include "volsurf/volren/volren.hpp"

namespace volsurf {
namespace {

// Upper bound on the Lipschitz constant of a field; used only to skip blocks
// of voxels that cannot be occupied.
double lipschitz_bound(const SdfField& f);

double lipschitz_bound(const sdf::Node& node) {
  return std::visit(
      [](const auto& n) -> double {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, sdf::Union> || std::is_same_v<T, sdf::Intersection> ||
                      std::is_same_v<T, sdf::Subtraction> || std::is_same_v<T, sdf::SmoothUnion>) {
          return std::max(lipschitz_bound(*n.a), lipschitz_bound(*n.b));
        } else if constexpr (std::is_same_v<T, sdf::Offset>) {
          return lipschitz_bound(*n.child);
        } else if constexpr (std::is_same_v<T, sdf::Scale>) {
          return std::abs(n.factor) * lipschitz_bound(*n.child);
        } else if constexpr (std::is_same_v<T, sdf::Grid>) {
          const Vec3 cell{n.bounds.extent().x / (n.nx - 1), n.bounds.extent().y / (n.ny - 1),
                          n.bounds.extent().z / (n.nz - 1)};
          double sx = 0, sy = 0, sz = 0;
          for (int k = 0; k < n.nz; ++k) {
            for (int j = 0; j < n.ny; ++j) {
              for (int i = 0; i < n.nx; ++i) {
                const double v = n.node(i, j, k);
                if (i + 1 < n.nx) sx = std::max(sx, std::abs(n.node(i + 1, j, k) - v) / cell.x);
                if (j + 1 < n.ny) sy = std::max(sy, std::abs(n.node(i, j + 1, k) - v) / cell.y);
                if (k + 1 < n.nz) sz = std::max(sz, std::abs(n.node(i, j, k + 1) - v) / cell.z);
              }
            }
          }
          return std::sqrt(sx * sx + sy * sy + sz * sz);
        } else {
          return 1.0;
        }
      },
      node);
}

double lipschitz_bound(const SdfField& f) { return lipschitz_bound(f.node()); }

constexpr int kBlock = 8;

}  // namespace

std::array<int, 3> OccupancyGrid::voxel_of(const Vec3& x) const {
  const Vec3 s = voxel_size();
  std::array<int, 3> v{};
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor((x[a] - bbox.lo[a]) / s[a]);
    v[a] = static_cast<int>(std::clamp(f, 0.0, static_cast<double>(resolution - 1)));
  }
  return v;
}

bool OccupancyGrid::occupied_at(const Vec3& x) const {
  if (!bbox.contains(x)) return false;
  const auto v = voxel_of(x);
  return occupied(v[0], v[1], v[2]);
}

std::size_t OccupancyGrid::occupied_count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

double density_support_radius(double beta, double tau) {
  if (beta / 4.0 < tau) return 0.0;
  // beta e = tau (1 + e)^2 with e = exp(-beta d); take the root e <= 1.
  const double b = beta - 2.0 * tau;
  const double e = (b - std::sqrt(std::max(0.0, b * b - 4.0 * tau * tau))) / (2.0 * tau);
  if (!(e > 0.0)) return std::numeric_limits<double>::infinity();
  return -std::log(e) / beta;
}

OccupancyGrid build_occupancy(const KSdf& k, const Aabb& bbox, double beta, int resolution,
                              double tau) {
  if (resolution < 1) throw InvalidArgument("occupancy resolution must be positive");
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("tau must lie in (0,1)");
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  if (bbox.empty()) throw InvalidArgument("occupancy box is empty");

  OccupancyGrid grid;
  grid.resolution = resolution;
  grid.bbox = bbox;
  grid.bits.assign(static_cast<std::size_t>(resolution) * resolution * resolution, 0);

  const Vec3 s = grid.voxel_size();
  const double half_diag = 0.5 * length(s);
  const double support = density_support_radius(beta, tau);

  double max_shift = 0.0;
  double outer_sum = 0.0, inner_sum = 0.0;
  for (const auto& o : k.outer_offsets()) outer_sum += o.max_activated();
  for (const auto& o : k.inner_offsets()) inner_sum += o.max_activated();
  max_shift = std::max(outer_sum, inner_sum);
  const double lipschitz = lipschitz_bound(k.main());

  const int blocks = (resolution + kBlock - 1) / kBlock;
  const int layers = k.k();
  parallel_for(static_cast<std::size_t>(blocks) * blocks * blocks, 4, [&](std::size_t b0, std::size_t b1) {
    std::array<double, kMaxLayers> d{};
    for (std::size_t b = b0; b < b1; ++b) {
      const int bi = static_cast<int>(b % blocks);
      const int bj = static_cast<int>((b / blocks) % blocks);
      const int bk = static_cast<int>(b / (static_cast<std::size_t>(blocks) * blocks));
      const int i0 = bi * kBlock, j0 = bj * kBlock, k0 = bk * kBlock;
      const int i1 = std::min(resolution, i0 + kBlock);
      const int j1 = std::min(resolution, j0 + kBlock);
      const int k1 = std::min(resolution, k0 + kBlock);
      const Vec3 lo = bbox.lo + cwise_mul(s, Vec3(i0, j0, k0));
      const Vec3 hi = bbox.lo + cwise_mul(s, Vec3(i1, j1, k1));
      const Vec3 c = (lo + hi) * 0.5;
      const double block_half_diag = 0.5 * length(hi - lo);
      const double dc = std::abs(k.main().eval(c));
      if (dc - lipschitz * block_half_diag - max_shift - half_diag > support * (1.0 + 1e-9) + 1e-12) {
        continue;
      }
      for (int kk = k0; kk < k1; ++kk) {
        for (int jj = j0; jj < j1; ++jj) {
          for (int ii = i0; ii < i1; ++ii) {
            const Vec3 x = bbox.lo + cwise_mul(s, Vec3(ii + 0.5, jj + 0.5, kk + 0.5));
            k.layer_distances(x, std::span<double>(d.data(), layers));
            for (int j = 0; j < layers; ++j) {
              if (logistic_density(beta, std::max(0.0, std::abs(d[j]) - half_diag)) >= tau) {
                grid.bits[grid.index(ii, jj, kk)] = 1;
                break;
              }
            }
          }
        }
      }
    }
  });
  return grid;
}

std::vector<std::array<double, 2>> occupied_intervals(const Ray& ray, const OccupancyGrid& grid) {
  std::vector<std::array<double, 2>> out;
  double t0 = 0.0, t1 = 0.0;
  if (!intersect_aabb(ray, grid.bbox, t0, t1) || !(t1 > t0)) return out;

  const Vec3 s = grid.voxel_size();
  const Vec3& dir = ray.direction.vec();
  std::array<int, 3> idx = grid.voxel_of(ray.at(t0));
  std::array<int, 3> step{};
  std::array<double, 3> t_next{};
  auto boundary_t = [&](int a) {
    const double plane = grid.bbox.lo[a] + (idx[a] + (step[a] > 0 ? 1 : 0)) * s[a];
    return (plane - ray.origin[a]) / dir[a];
  };
  for (int a = 0; a < 3; ++a) {
    step[a] = dir[a] > 0.0 ? 1 : (dir[a] < 0.0 ? -1 : 0);
    t_next[a] = step[a] == 0 ? std::numeric_limits<double>::infinity() : boundary_t(a);
  }

  double t = t0;
  for (;;) {
    int axis = 0;
    if (t_next[1] < t_next[axis]) axis = 1;
    if (t_next[2] < t_next[axis]) axis = 2;
    const double tn = std::max(t, t_next[axis]);
    const double end = std::min(tn, t1);
    if (end > t && grid.occupied(idx[0], idx[1], idx[2])) {
      if (!out.empty() && out.back()[1] == t) {
        out.back()[1] = end;
      } else {
        out.push_back({t, end});
      }
    }
    if (tn >= t1) break;
    idx[axis] += step[axis];
    if (idx[axis] < 0 || idx[axis] >= grid.resolution) break;
    t = tn;
    t_next[axis] = boundary_t(axis);
  }
  return out;
}

}  // namespace volsurf
