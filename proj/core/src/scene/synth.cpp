// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ocrf/scene/scene.hpp"
#include "ocrf/util/check.hpp"
#include "ocrf/util/rng.hpp"

namespace ocrf::scene {

void SceneConfig::validate() const {
  grid.validate();
  if (box_count_min < 0 || box_count_max < box_count_min) {
    util::fail_invalid("scene config: invalid box count range");
  }
  if (box_size_min <= 0.0 || box_size_max < box_size_min) {
    util::fail_invalid("scene config: invalid box size range");
  }
  if (camera_count < 1) util::fail_invalid("scene config: camera_count must be >= 1");
  if (image_height < 1 || image_width < 1) util::fail_invalid("scene config: empty image");
  if (raw_channels < 4) util::fail_invalid("scene config: raw_channels must be >= 4");
  if (checker_px < 1) util::fail_invalid("scene config: checker_px must be >= 1");
  if (noise_level < 0.0) util::fail_invalid("scene config: noise_level must be >= 0");
  // Box placement ranges must stay inside the perception range.
  const geom::Vec3 hi = grid.max_corner();
  const double margin = 0.5 * box_size_max * std::sqrt(2.0);  // yaw-rotated footprint
  if (grid.origin.x > -place_radius - margin || hi.x < place_radius + margin ||
      grid.origin.y > -place_radius - margin || hi.y < place_radius + margin) {
    util::fail_invalid("scene config: box placement range exceeds the grid XY extent");
  }
  if (grid.origin.z > box_zmin - 0.5 * box_size_max || hi.z < box_zmax + 0.5 * box_size_max) {
    util::fail_invalid("scene config: box z range exceeds the grid height");
  }
}

std::array<double, 3> SceneConfig::background_at(int px, int py) const {
  if (background == BackgroundMode::kFlat) return bg_color;
  const int parity = ((px / checker_px) + (py / checker_px)) & 1;
  return parity ? bg_color2 : bg_color;
}

namespace {

bool boxes_overlap(const geom::Box3D& a, const geom::Box3D& b) {
  // Conservative bounding-sphere test; rejects some valid layouts, never
  // accepts an overlapping one.
  const double ra = 0.5 * a.size.norm();
  const double rb = 0.5 * b.size.norm();
  return (a.center - b.center).norm() <= ra + rb;
}

bool box_inside_grid(const geom::Box3D& box, const geom::VoxelGridSpec& grid) {
  const geom::Vec3 hi = grid.max_corner();
  for (const geom::Vec3& c : box.corners()) {
    if (c.x < grid.origin.x || c.x > hi.x || c.y < grid.origin.y || c.y > hi.y ||
        c.z < grid.origin.z || c.z > hi.z) {
      return false;
    }
  }
  return true;
}

}  // namespace

SyntheticScene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  util::Rng rng(cfg.seed);

  SyntheticScene scene;
  scene.seed = cfg.seed;
  scene.config = cfg;

  const int n_boxes =
      cfg.box_count_min +
      static_cast<int>(rng.uniform_int(cfg.box_count_max - cfg.box_count_min + 1));
  int attempts = 0;
  while (static_cast<int>(scene.boxes.size()) < n_boxes) {
    if (++attempts > 1000) {
      throw std::runtime_error("scene generation: box rejection sampling exhausted after 1000 "
                               "attempts (seed " +
                               std::to_string(cfg.seed) + ")");
    }
    geom::Box3D box;
    box.center = {rng.uniform(-cfg.place_radius, cfg.place_radius),
                  rng.uniform(-cfg.place_radius, cfg.place_radius),
                  rng.uniform(cfg.box_zmin, cfg.box_zmax)};
    box.size = {rng.uniform(cfg.box_size_min, cfg.box_size_max),
                rng.uniform(cfg.box_size_min, cfg.box_size_max),
                rng.uniform(cfg.box_size_min, cfg.box_size_max)};
    box.yaw = rng.uniform(0.0, 2.0 * M_PI);
    box.color = {rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)};
    if (!box_inside_grid(box, cfg.grid)) continue;
    bool clash = false;
    for (const geom::Box3D& other : scene.boxes) clash = clash || boxes_overlap(box, other);
    if (clash) continue;
    scene.boxes.push_back(box);
  }

  for (int v = 0; v < cfg.camera_count; ++v) {
    const double angle = 2.0 * M_PI * v / cfg.camera_count;
    const geom::Vec3 pos{cfg.camera_radius * std::cos(angle), cfg.camera_radius * std::sin(angle),
                         cfg.camera_height};
    scene.cameras.push_back(geom::Camera::look_at(pos, {0.0, 0.0, 0.0}, cfg.focal, cfg.focal,
                                                  0.5 * cfg.image_width, 0.5 * cfg.image_height,
                                                  cfg.image_width, cfg.image_height));
  }

  scene.gt_rgb.resize(scene.cameras.size());
  scene.gt_depth.resize(scene.cameras.size());
  scene.masks2d.reserve(scene.cameras.size());
  for (std::size_t v = 0; v < scene.cameras.size(); ++v) {
    raycast_reference(scene.boxes, cfg, scene.cameras[v], scene.gt_rgb[v], scene.gt_depth[v]);
    scene.masks2d.push_back(geom::boxes_to_mask2d(scene.boxes, scene.cameras[v]));
  }
  scene.mask_bev = geom::boxes_to_maskbev(scene.boxes, cfg.grid);

  const auto& grid = cfg.grid;
  const int64_t n = grid.count();
  scene.raw_grid = diff::Tensor({cfg.raw_channels, grid.nx, grid.ny, grid.nz});
  double* raw = scene.raw_grid.data();
  for (int i = 0; i < grid.nx; ++i) {
    for (int j = 0; j < grid.ny; ++j) {
      for (int k = 0; k < grid.nz; ++k) {
        const geom::Vec3 c = grid.center(i, j, k);
        const int64_t idx = grid.flat(i, j, k);
        for (const geom::Box3D& box : scene.boxes) {
          if (box.contains(c)) {
            raw[idx] = 1.0;
            for (int ch = 0; ch < 3; ++ch) {
              raw[(ch + 1) * n + idx] = box.color[static_cast<std::size_t>(ch)];
            }
            break;
          }
        }
      }
    }
  }
  // Noise channels last so a level change leaves the layout untouched.
  for (int ch = 4; ch < cfg.raw_channels; ++ch) {
    double* plane = raw + static_cast<int64_t>(ch) * n;
    for (int64_t i = 0; i < n; ++i) plane[i] = cfg.noise_level * rng.uniform();
  }
  return scene;
}

}  // namespace ocrf::scene
