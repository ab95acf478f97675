// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "ocrf/scene/scene.hpp"
#include "ocrf/util/parallel.hpp"

namespace ocrf::scene {

std::array<double, 3> bilinear_sample(const Image& img, double u, double v) {
  const double x = u - 0.5;
  const double y = v - 0.5;
  const double xf = std::floor(x);
  const double yf = std::floor(y);
  const double ax = x - xf;
  const double ay = y - yf;
  auto clampi = [](int v_, int lo, int hi) { return v_ < lo ? lo : (v_ > hi ? hi : v_); };
  const int x0 = clampi(static_cast<int>(xf), 0, img.width - 1);
  const int x1 = clampi(x0 + 1, 0, img.width - 1);
  const int y0 = clampi(static_cast<int>(yf), 0, img.height - 1);
  const int y1 = clampi(y0 + 1, 0, img.height - 1);
  const double* p00 = img.pixel(y0, x0);
  const double* p01 = img.pixel(y0, x1);
  const double* p10 = img.pixel(y1, x0);
  const double* p11 = img.pixel(y1, x1);
  std::array<double, 3> out{};
  for (int c = 0; c < 3; ++c) {
    const double top = p00[c] * (1.0 - ax) + p01[c] * ax;
    const double bot = p10[c] * (1.0 - ax) + p11[c] * ax;
    out[static_cast<std::size_t>(c)] = top * (1.0 - ay) + bot * ay;
  }
  return out;
}

void raycast_reference(const std::vector<geom::Box3D>& boxes, const SceneConfig& cfg,
                       const geom::Camera& cam, Image& rgb, DepthMap& depth) {
  rgb = Image(cam.height, cam.width);
  depth = DepthMap(cam.height, cam.width);
  util::parallel_for(cam.height, [&](int64_t py) {
    for (int px = 0; px < cam.width; ++px) {
      const geom::Ray ray = geom::ray_through_pixel(px, static_cast<int>(py), cam);
      double best_t = 0.0;
      const geom::Box3D* best_box = nullptr;
      for (const geom::Box3D& box : boxes) {
        const auto t = geom::ray_box_hit(ray.origin, ray.dir, box);
        if (t && (!best_box || *t < best_t)) {
          best_t = *t;
          best_box = &box;
        }
      }
      double* pix = rgb.pixel(static_cast<int>(py), px);
      if (best_box) {
        for (int c = 0; c < 3; ++c) pix[c] = best_box->color[static_cast<std::size_t>(c)];
        depth.at(static_cast<int>(py), px) = best_t;
      } else {
        const auto bg = cfg.background_at(px, static_cast<int>(py));
        for (int c = 0; c < 3; ++c) pix[c] = bg[static_cast<std::size_t>(c)];
      }
    }
  });
}

}  // namespace ocrf::scene
