// SPDX-License-Identifier: Apache-2.0
#include "ocrf/geom/camera.hpp"

#include <cmath>

#include "ocrf/util/check.hpp"

namespace ocrf::geom {

void Camera::validate() const {
  if (fx <= 0.0 || fy <= 0.0) util::fail_invalid("camera: fx and fy must be positive");
  if (width <= 0 || height <= 0) util::fail_invalid("camera: image extents must be positive");
  const Mat3 rtr = rotation.transposed() * rotation;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double expect = i == j ? 1.0 : 0.0;
      if (std::fabs(rtr(i, j) - expect) > 1e-9) {
        util::fail_invalid("camera: rotation is not orthonormal within 1e-9");
      }
    }
  }
}

Camera Camera::look_at(const Vec3& pos, const Vec3& target, double fx, double fy, double cx,
                       double cy, int width, int height) {
  const Vec3 forward = (target - pos).normalized();
  Vec3 up{0.0, 0.0, 1.0};
  if (std::fabs(forward.dot(up)) > 1.0 - 1e-9) up = Vec3{0.0, 1.0, 0.0};
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right);  // +y is image-down
  Camera cam;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = cx;
  cam.cy = cy;
  cam.width = width;
  cam.height = height;
  cam.rotation = Mat3::from_rows(right, down, forward);
  cam.translation = (cam.rotation * pos) * -1.0;
  cam.validate();
  return cam;
}

Projection project(const Vec3& point, const Camera& cam) {
  const Vec3 pc = cam.rotation * point + cam.translation;
  Projection out;
  out.depth = pc.z;
  if (pc.z <= 1e-6) {
    out.behind = true;
    return out;
  }
  out.u = cam.fx * pc.x / pc.z + cam.cx;
  out.v = cam.fy * pc.y / pc.z + cam.cy;
  return out;
}

Vec3 unproject(double u, double v, double depth, const Camera& cam) {
  const Vec3 pc{(u - cam.cx) * depth / cam.fx, (v - cam.cy) * depth / cam.fy, depth};
  return cam.rotation.transposed_mul(pc - cam.translation);
}

Ray ray_through_pixel(int px, int py, const Camera& cam) {
  const Vec3 dir_cam{(px + 0.5 - cam.cx) / cam.fx, (py + 0.5 - cam.cy) / cam.fy, 1.0};
  Ray ray;
  ray.origin = cam.position();
  ray.dir = cam.rotation.transposed_mul(dir_cam).normalized();
  return ray;
}

}  // namespace ocrf::geom
