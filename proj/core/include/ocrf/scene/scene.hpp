// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ocrf/diff/tensor.hpp"
#include "ocrf/geom/box.hpp"
#include "ocrf/geom/camera.hpp"
#include "ocrf/geom/grid.hpp"
#include "ocrf/geom/masks.hpp"
#include "ocrf/scene/image.hpp"

namespace ocrf::scene {

enum class BackgroundMode { kFlat, kChecker };

struct SceneConfig {
  uint64_t seed = 1;
  int box_count_min = 1;
  int box_count_max = 4;
  double box_size_min = 1.0;
  double box_size_max = 3.0;
  double place_radius = 5.0;  // XY half-extent for box centers
  double box_zmin = -1.5;     // box center z range
  double box_zmax = 1.0;
  int camera_count = 6;
  double camera_radius = 9.0;
  double camera_height = 3.0;
  double focal = 48.0;
  int image_height = 64;
  int image_width = 64;
  geom::VoxelGridSpec grid{{-8.0, -8.0, -4.0}, 0.5, 32, 32, 16};
  BackgroundMode background = BackgroundMode::kChecker;
  std::array<double, 3> bg_color{0.30, 0.30, 0.30};
  std::array<double, 3> bg_color2{0.60, 0.60, 0.60};
  int checker_px = 8;
  double noise_level = 0.1;
  int raw_channels = 8;  // occupancy + RGB + noise

  void validate() const;
  /// GT background color at a pixel (screen-space checker or flat).
  std::array<double, 3> background_at(int px, int py) const;
};

/// Synthetic world: boxes with colors, a camera ring, reference renders from
/// the analytic ray caster, foreground masks, and the raw voxel grid that
/// stands in for lifted image features.
struct SyntheticScene {
  uint64_t seed = 0;
  SceneConfig config;
  std::vector<geom::Box3D> boxes;
  std::vector<geom::Camera> cameras;
  std::vector<Image> gt_rgb;
  std::vector<DepthMap> gt_depth;
  std::vector<geom::Mask2D> masks2d;
  geom::MaskBEV mask_bev;
  /// (C_raw, X, Y, Z); channel 0 occupancy, 1..3 box color, rest noise.
  diff::Tensor raw_grid;
};

/// Deterministic in cfg.seed. Boxes are rejection-sampled to be pairwise
/// non-overlapping and fully inside the grid; exhaustion after 1000 attempts
/// fails with the seed named.
SyntheticScene generate_scene(const SceneConfig& cfg);

/// Analytic ray/oriented-box reference renderer: per pixel the nearest hit's
/// box color and Euclidean hit distance; background color and depth 0 on
/// miss. No learnable parameters; this is the oracle for all rendering tests.
void raycast_reference(const std::vector<geom::Box3D>& boxes, const SceneConfig& cfg,
                       const geom::Camera& cam, Image& rgb, DepthMap& depth);

}  // namespace ocrf::scene
