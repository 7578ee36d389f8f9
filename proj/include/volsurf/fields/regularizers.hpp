// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>

#include "volsurf/fields/sdf.hpp"

namespace volsurf {

/// Mean of (|grad d| - 1)^2 over the points. A vanishing gradient counts as
/// residual 1.
double eikonal_residual(const SdfField& field, std::span<const Vec3> points);

/// Mean of 1 - <n(x), n(x + eps t)> with t a random unit tangent at x.
/// Points with a degenerate normal are skipped; throws DegenerateNormalError
/// if every point is skipped. The tangent directions come from `seed`.
double curvature_residual(const SdfField& field, std::span<const Vec3> points, double eps,
                          std::uint64_t seed = 0);

}  // namespace volsurf
