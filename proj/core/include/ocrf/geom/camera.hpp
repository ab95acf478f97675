// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ocrf/geom/types.hpp"

namespace ocrf::geom {

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
  bool behind = false;  // camera-space z <= 1e-6; caller skips the point
};

/// Pinhole camera. `rotation` is world-to-camera; camera frame is +z forward,
/// +x right, +y down (image v grows downward).
struct Camera {
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  Mat3 rotation;
  Vec3 translation;
  int width = 0, height = 0;

  /// Validates fx,fy > 0 and R^T R = I within 1e-9; throws otherwise.
  void validate() const;

  /// Camera placed at `pos` looking at `target`, world up (0,0,1).
  static Camera look_at(const Vec3& pos, const Vec3& target, double fx, double fy, double cx,
                        double cy, int width, int height);

  Vec3 position() const { return rotation.transposed_mul(translation * -1.0); }
};

Projection project(const Vec3& point, const Camera& cam);

/// Inverse of project for depth > 0.
Vec3 unproject(double u, double v, double depth, const Camera& cam);

/// World-space ray through the center of pixel (px, py); direction normalized.
struct Ray {
  Vec3 origin;
  Vec3 dir;
};
Ray ray_through_pixel(int px, int py, const Camera& cam);

}  // namespace ocrf::geom
