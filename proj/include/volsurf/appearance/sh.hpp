// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <vector>

#include "volsurf/core/vec.hpp"

namespace volsurf {

inline constexpr int kMaxShDegree = 3;
inline constexpr int kMaxShCoefficients = (kMaxShDegree + 1) * (kMaxShDegree + 1);

/// Number of coefficients in band l: 2l + 1.
constexpr int sh_band_size(int band) { return 2 * band + 1; }
/// Index of the first coefficient of band l: l^2.
constexpr int sh_band_offset(int band) { return band * band; }
constexpr int sh_coefficient_count(int degree) { return (degree + 1) * (degree + 1); }
/// Band that coefficient i belongs to.
int sh_band_of(int coefficient);

/// Real spherical harmonics up to `degree` (<= 3), bands ordered l = 0..degree
/// and m = -l..l within a band. Uses the sign convention common in radiance
/// field code (negative odd-m terms of band 1).
void sh_basis(int degree, const Vec3& v, std::array<double, kMaxShCoefficients>& out);

std::vector<double> sh_basis(int degree, const UnitVec3& v);

inline constexpr double kShC0 = 0.28209479177387814;

}  // namespace volsurf
