// SPDX-License-Identifier: Apache-2.0
#include "ocrf/geom/box.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ocrf/util/check.hpp"

namespace ocrf::geom {

void Box3D::validate() const {
  if (size.x <= 0.0 || size.y <= 0.0 || size.z <= 0.0) {
    util::fail_invalid("box: size components must be positive");
  }
}

std::array<Vec3, 8> Box3D::corners() const {
  const Mat3 rot = Mat3::rotation_z(yaw);
  std::array<Vec3, 8> out;
  int n = 0;
  for (int sx : {-1, 1}) {
    for (int sy : {-1, 1}) {
      for (int sz : {-1, 1}) {
        const Vec3 local{0.5 * sx * size.x, 0.5 * sy * size.y, 0.5 * sz * size.z};
        out[static_cast<std::size_t>(n++)] = center + rot * local;
      }
    }
  }
  return out;
}

bool Box3D::contains(const Vec3& p) const {
  const Vec3 d = p - center;
  const double c = std::cos(-yaw), s = std::sin(-yaw);
  const double lx = c * d.x - s * d.y;
  const double ly = s * d.x + c * d.y;
  return std::fabs(lx) <= 0.5 * size.x && std::fabs(ly) <= 0.5 * size.y &&
         std::fabs(d.z) <= 0.5 * size.z;
}

bool Box3D::footprint_contains(double x, double y) const {
  const double dx = x - center.x;
  const double dy = y - center.y;
  const double c = std::cos(-yaw), s = std::sin(-yaw);
  const double lx = c * dx - s * dy;
  const double ly = s * dx + c * dy;
  return std::fabs(lx) <= 0.5 * size.x && std::fabs(ly) <= 0.5 * size.y;
}

std::optional<double> ray_box_hit(const Vec3& origin, const Vec3& dir, const Box3D& box) {
  // Transform into the box frame so the slabs are axis-aligned.
  const double c = std::cos(-box.yaw), s = std::sin(-box.yaw);
  const Vec3 od = origin - box.center;
  const Vec3 o{c * od.x - s * od.y, s * od.x + c * od.y, od.z};
  const Vec3 d{c * dir.x - s * dir.y, s * dir.x + c * dir.y, dir.z};

  const double half[3] = {0.5 * box.size.x, 0.5 * box.size.y, 0.5 * box.size.z};
  const double po[3] = {o.x, o.y, o.z};
  const double pd[3] = {d.x, d.y, d.z};

  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::fabs(pd[a]) < 1e-15) {
      if (std::fabs(po[a]) > half[a]) return std::nullopt;
      continue;
    }
    double t1 = (-half[a] - po[a]) / pd[a];
    double t2 = (half[a] - po[a]) / pd[a];
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
    if (tmin > tmax) return std::nullopt;
  }
  constexpr double kMinT = 1e-9;
  if (tmax < kMinT) return std::nullopt;
  return tmin >= kMinT ? tmin : tmax;
}

}  // namespace ocrf::geom
