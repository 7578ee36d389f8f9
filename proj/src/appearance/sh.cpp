// SPDX-License-Identifier: Apache-2.0
#include "volsurf/appearance/sh.hpp"

#include "volsurf/core/error.hpp"

namespace volsurf {

int sh_band_of(int coefficient) {
  int band = 0;
  while ((band + 1) * (band + 1) <= coefficient) ++band;
  return band;
}

void sh_basis(int degree, const Vec3& v, std::array<double, kMaxShCoefficients>& out) {
  if (degree < 0 || degree > kMaxShDegree) throw InvalidArgument("SH degree must be in [0, 3]");
  constexpr double C1 = 0.4886025119029199;
  constexpr double C2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                           -1.0925484305920792, 0.5462742152960396};
  constexpr double C3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                           0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                           -0.5900435899266435};
  const double x = v.x, y = v.y, z = v.z;
  out[0] = kShC0;
  if (degree < 1) return;
  out[1] = -C1 * y;
  out[2] = C1 * z;
  out[3] = -C1 * x;
  if (degree < 2) return;
  const double xx = x * x, yy = y * y, zz = z * z;
  out[4] = C2[0] * x * y;
  out[5] = C2[1] * y * z;
  out[6] = C2[2] * (2.0 * zz - xx - yy);
  out[7] = C2[3] * x * z;
  out[8] = C2[4] * (xx - yy);
  if (degree < 3) return;
  out[9] = C3[0] * y * (3.0 * xx - yy);
  out[10] = C3[1] * x * y * z;
  out[11] = C3[2] * y * (4.0 * zz - xx - yy);
  out[12] = C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
  out[13] = C3[4] * x * (4.0 * zz - xx - yy);
  out[14] = C3[5] * z * (xx - yy);
  out[15] = C3[6] * x * (xx - 3.0 * yy);
}

std::vector<double> sh_basis(int degree, const UnitVec3& v) {
  std::array<double, kMaxShCoefficients> tmp{};
  sh_basis(degree, v.vec(), tmp);
  return {tmp.begin(), tmp.begin() + sh_coefficient_count(degree)};
}

}  // namespace volsurf
