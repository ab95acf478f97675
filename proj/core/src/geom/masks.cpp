// SPDX-License-Identifier: Apache-2.0
#include "ocrf/geom/masks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ocrf::geom {

int64_t Mask2D::count() const {
  return std::accumulate(values.begin(), values.end(), int64_t{0});
}

int64_t MaskBEV::count() const {
  return std::accumulate(values.begin(), values.end(), int64_t{0});
}

namespace {

struct Pt {
  double x, y;
};

double cross(const Pt& o, const Pt& a, const Pt& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Andrew monotone chain, CCW in the (u,v) algebra; collinear points dropped.
std::vector<Pt> convex_hull(std::vector<Pt> pts) {
  std::sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Pt& a, const Pt& b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  const std::size_t n = pts.size();
  if (n < 3) return pts;
  std::vector<Pt> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

bool inside_hull(const std::vector<Pt>& hull, double x, double y) {
  if (hull.size() < 3) return false;
  constexpr double kEdgeTol = 1e-9;
  const Pt p{x, y};
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Pt& a = hull[i];
    const Pt& b = hull[(i + 1) % hull.size()];
    if (cross(a, b, p) < -kEdgeTol) return false;
  }
  return true;
}

}  // namespace

Mask2D box_to_mask2d(const Box3D& box, const Camera& cam) {
  Mask2D mask(cam.height, cam.width);
  std::vector<Pt> projected;
  projected.reserve(8);
  for (const Vec3& corner : box.corners()) {
    const Projection pr = project(corner, cam);
    if (pr.behind) continue;
    projected.push_back({pr.u, pr.v});
  }
  if (projected.empty()) return mask;
  const std::vector<Pt> hull = convex_hull(std::move(projected));
  if (hull.size() < 3) return mask;

  double min_x = hull[0].x, max_x = hull[0].x, min_y = hull[0].y, max_y = hull[0].y;
  for (const Pt& p : hull) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const int x0 = std::max(0, static_cast<int>(std::floor(min_x - 0.5)));
  const int x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(max_x)));
  const int y0 = std::max(0, static_cast<int>(std::floor(min_y - 0.5)));
  const int y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(max_y)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (inside_hull(hull, x + 0.5, y + 0.5)) mask.at(y, x) = 1;
    }
  }
  return mask;
}

Mask2D boxes_to_mask2d(const std::vector<Box3D>& boxes, const Camera& cam) {
  Mask2D mask(cam.height, cam.width);
  for (const Box3D& box : boxes) {
    const Mask2D one = box_to_mask2d(box, cam);
    for (std::size_t i = 0; i < mask.values.size(); ++i) {
      mask.values[i] = mask.values[i] || one.values[i];
    }
  }
  return mask;
}

MaskBEV boxes_to_maskbev(const std::vector<Box3D>& boxes, const VoxelGridSpec& spec) {
  spec.validate();
  MaskBEV mask(spec.nx, spec.ny);
  for (int i = 0; i < spec.nx; ++i) {
    for (int j = 0; j < spec.ny; ++j) {
      const double x = spec.origin.x + spec.voxel_size * (i + 0.5);
      const double y = spec.origin.y + spec.voxel_size * (j + 0.5);
      for (const Box3D& box : boxes) {
        if (box.footprint_contains(x, y)) {
          mask.at(i, j) = 1;
          break;
        }
      }
    }
  }
  return mask;
}

}  // namespace ocrf::geom
