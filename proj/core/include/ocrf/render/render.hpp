// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <vector>

#include "ocrf/diff/ops.hpp"
#include "ocrf/diff/tensor.hpp"
#include "ocrf/fields/decoder.hpp"
#include "ocrf/geom/camera.hpp"
#include "ocrf/geom/grid.hpp"
#include "ocrf/scene/image.hpp"

namespace ocrf::render {

/// One rendered viewpoint: (H,W,3) image in [0,1] and (H,W) depth >= 0.
struct RenderOutput {
  diff::Tensor image;
  diff::Tensor depth;
};

struct SplatOptions {
  std::array<double, 3> background{0.0, 0.0, 0.0};
  /// Point footprint composites each Gaussian into the single pixel holding
  /// its projected center; the disk mode spreads it over a radius of
  /// fx * mean(scale) / z pixels. The disk radius is treated as constant in
  /// backward, so scale and rotation heads receive no gradient either way.
  bool disk_footprint = false;
  double max_radius_px = 8.0;
};

/// Depth-sorted front-to-back alpha compositing of the per-voxel Gaussians;
/// composited depth uses projection depth and is not alpha-normalized.
RenderOutput splat_render(const fields::GaussianAttributes& gaussians, const geom::Camera& cam,
                          const SplatOptions& opts = {});

struct VolumeOptions {
  std::array<double, 3> background{0.0, 0.0, 0.0};
  double opacity_threshold = 1e-3;
};

struct VolumeStats {
  int64_t background_pixels = 0;
  int64_t gray_fallback_pixels = 0;  // sample visible in no source view
};

struct SourceViews {
  const std::vector<scene::Image>* images = nullptr;
  const std::vector<geom::Camera>* cameras = nullptr;
};

/// Single-sample volume rendering: march the grid along each pixel ray in
/// voxel_size/2 steps, take the voxel with maximal opacity, and shade it by
/// the softmax-weighted blend of the source views that see its center. Depth
/// is opacity times the Euclidean distance to the voxel center.
RenderOutput volume_render(const fields::NerfAttributes& nerf, const geom::Camera& cam,
                           const SourceViews& views, const geom::VoxelGridSpec& spec,
                           const VolumeOptions& opts = {}, VolumeStats* stats = nullptr);

/// alpha = sigmoid(theta), beta = 1 - alpha; alpha + beta = 1 by construction.
struct FusionParams {
  diff::Tensor theta;  // scalar, learnable

  static FusionParams init(double theta0 = 0.0);
  diff::Tensor alpha() const { return diff::sigmoid(theta); }
  double alpha_value() const;
};

/// Convex combination of two rendered outputs with the shared alpha.
RenderOutput fuse(const RenderOutput& a, const RenderOutput& b, const FusionParams& fp);

}  // namespace ocrf::render
