// SPDX-License-Identifier: Apache-2.0
#include "volsurf/core/camera.hpp"

#include <cmath>
#include <numbers>

#include "volsurf/core/error.hpp"

namespace volsurf {

Ray Camera::image_ray(double u, double v) const {
  const double xc = (u - cx) / fx;
  const double yc = (v - cy) / fy;
  const Vec3 dir = right * xc + down * yc + forward;
  Ray ray;
  ray.origin = position;
  ray.direction = UnitVec3(dir);
  return ray;
}

Ray Camera::pixel_ray(int px, int py) const { return image_ray(px + 0.5, py + 0.5); }

Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_y_deg, int width,
               int height) {
  if (width <= 0 || height <= 0) throw InvalidArgument("camera resolution must be positive");
  if (!(fov_y_deg > 0.0 && fov_y_deg < 180.0)) throw InvalidArgument("fov must be in (0, 180)");
  Camera cam;
  cam.width = width;
  cam.height = height;
  cam.position = eye;
  const Vec3 f = target - eye;
  if (length(f) == 0.0) throw InvalidArgument("camera eye coincides with target");
  cam.forward = f / length(f);
  Vec3 r = cross(cam.forward, up);
  if (length(r) < 1e-12) {
    // Looking straight along `up`; any perpendicular axis will do.
    r = cross(cam.forward, std::abs(cam.forward.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 0, 1});
  }
  cam.right = r / length(r);
  cam.down = cross(cam.forward, cam.right);
  const double focal = 0.5 * height / std::tan(0.5 * fov_y_deg * std::numbers::pi / 180.0);
  cam.fx = focal;
  cam.fy = focal;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  return cam;
}

std::vector<Camera> fibonacci_cameras(int count, const Vec3& target, double distance,
                                      double fov_y_deg, int width, int height) {
  std::vector<Camera> cams;
  cams.reserve(count);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double y = 1.0 - 2.0 * (i + 0.5) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
    const double phi = golden * i;
    const Vec3 dir{r * std::cos(phi), y, r * std::sin(phi)};
    cams.push_back(look_at(target + dir * distance, target, {0, 1, 0}, fov_y_deg, width, height));
  }
  return cams;
}

Camera orbit_camera(const Vec3& target, double yaw_deg, double pitch_deg, double distance,
                    double fov_y_deg, int width, int height) {
  const double yaw = yaw_deg * std::numbers::pi / 180.0;
  const double pitch = pitch_deg * std::numbers::pi / 180.0;
  const Vec3 dir{std::cos(pitch) * std::sin(yaw), std::sin(pitch), std::cos(pitch) * std::cos(yaw)};
  return look_at(target + dir * distance, target, {0, 1, 0}, fov_y_deg, width, height);
}

}  // namespace volsurf
