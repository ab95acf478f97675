// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>

#include "ocrf/geom/types.hpp"

namespace ocrf::geom {

/// Oriented 3D box: size = (length, width, height) along the box axes before
/// the z-rotation by yaw.
struct Box3D {
  Vec3 center;
  Vec3 size{1.0, 1.0, 1.0};
  double yaw = 0.0;
  std::array<double, 3> color{0.5, 0.5, 0.5};

  void validate() const;

  std::array<Vec3, 8> corners() const;
  bool contains(const Vec3& p) const;
  /// 2D containment of (x, y) in the yaw-rotated footprint rectangle.
  bool footprint_contains(double x, double y) const;
};

struct Ray;  // from camera.hpp

/// Slab-method intersection with the oriented box. Returns the distance to
/// the nearest hit strictly in front of the origin (dir must be normalized
/// for the result to be metric), or nullopt on miss.
std::optional<double> ray_box_hit(const Vec3& origin, const Vec3& dir, const Box3D& box);

}  // namespace ocrf::geom
