// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "ocrf/geom/box.hpp"
#include "ocrf/geom/camera.hpp"
#include "ocrf/geom/grid.hpp"

namespace ocrf::geom {

/// Binary H x W image mask; row-major, values in {0,1}.
struct Mask2D {
  int height = 0, width = 0;
  std::vector<uint8_t> values;

  Mask2D() = default;
  Mask2D(int h, int w) : height(h), width(w), values(static_cast<std::size_t>(h) * w, 0) {}
  uint8_t at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
  uint8_t& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  int64_t count() const;
};

/// Binary X x Y grid over BEV cells; x-major to match voxel flat order.
struct MaskBEV {
  int nx = 0, ny = 0;
  std::vector<uint8_t> values;

  MaskBEV() = default;
  MaskBEV(int x, int y) : nx(x), ny(y), values(static_cast<std::size_t>(x) * y, 0) {}
  uint8_t at(int i, int j) const { return values[static_cast<std::size_t>(i) * ny + j]; }
  uint8_t& at(int i, int j) { return values[static_cast<std::size_t>(i) * ny + j]; }
  int64_t count() const;
};

/// Pixels whose centers fall inside the convex hull of the projected visible
/// box corners, clipped to image bounds. Corners behind the camera are
/// dropped before hull construction; an all-behind box yields a zero mask.
Mask2D box_to_mask2d(const Box3D& box, const Camera& cam);

/// Union of per-box masks.
Mask2D boxes_to_mask2d(const std::vector<Box3D>& boxes, const Camera& cam);

/// Cell = 1 iff its center lies inside the yaw-rotated footprint of any box.
MaskBEV boxes_to_maskbev(const std::vector<Box3D>& boxes, const VoxelGridSpec& spec);

}  // namespace ocrf::geom
