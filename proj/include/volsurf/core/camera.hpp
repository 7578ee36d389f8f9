// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "volsurf/core/vec.hpp"

namespace volsurf {

/// Pinhole camera. Camera space follows the x-right, y-down, z-forward
/// convention; `right`, `down` and `forward` are those axes in world space.
struct Camera {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  Vec3 right{1.0, 0.0, 0.0};
  Vec3 down{0.0, -1.0, 0.0};
  Vec3 forward{0.0, 0.0, -1.0};
  Vec3 position{0.0, 0.0, 0.0};
  int width = 1;
  int height = 1;

  /// Ray through the center of pixel (px, py).
  Ray pixel_ray(int px, int py) const;
  /// Ray through continuous image coordinates (u, v) in pixels.
  Ray image_ray(double u, double v) const;
};

/// Camera at `eye` looking at `target` with vertical field of view `fov_y_deg`.
Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_y_deg, int width,
               int height);

/// Cameras on a sphere of radius `distance` around `target`, positions from a
/// Fibonacci lattice so coverage is near uniform for any count.
std::vector<Camera> fibonacci_cameras(int count, const Vec3& target, double distance,
                                      double fov_y_deg, int width, int height);

/// Camera orbiting `target` at the given yaw/pitch (degrees) and distance, y up.
Camera orbit_camera(const Vec3& target, double yaw_deg, double pitch_deg, double distance,
                    double fov_y_deg, int width, int height);

}  // namespace volsurf
