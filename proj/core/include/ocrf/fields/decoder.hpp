// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ocrf/diff/ops.hpp"
#include "ocrf/diff/tensor.hpp"
#include "ocrf/geom/grid.hpp"
#include "ocrf/util/rng.hpp"

namespace ocrf::fields {

/// Two-layer MLP heads decoding per-voxel features into the two radiance
/// field representations. Every head is its own two-layer affine stack with a
/// softplus hidden activation; output activations pin the physical ranges.
struct DecoderParams {
  int in_channels = 0;
  int hidden = 0;
  int views = 0;

  struct Head {
    diff::Tensor w1, b1, w2, b2;
  };
  Head scale;     // -> 3, softplus
  Head rotation;  // -> 4, unit-normalized
  Head opacity;   // -> 1, sigmoid
  Head color;     // -> 3, sigmoid
  Head density;   // -> 1, softplus
  Head weight;    // -> views, raw logits

  /// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)], deterministic in rng.
  static DecoderParams init(int in_channels, int hidden, int views, util::Rng& rng);
};

struct GaussianAttributes {
  diff::Tensor positions;  // (N,3) voxel centers, not learnable
  diff::Tensor scale;      // (N,3) > 0
  diff::Tensor rotation;   // (N,4) unit rows
  diff::Tensor opacity;    // (N,1) in (0,1)
  diff::Tensor color;      // (N,3) in (0,1)
};

struct NerfAttributes {
  diff::Tensor density;        // (N,1) >= 0
  diff::Tensor weight_logits;  // (N,V)
  diff::Tensor opacity;        // (N,1) = 1 - exp(-density)
};

/// F_v is (C_v, X, Y, Z). Positions come from voxel_centers(spec).
GaussianAttributes decode_gaussians(const diff::Tensor& voxel_features,
                                    const DecoderParams& params,
                                    const geom::VoxelGridSpec& spec);

NerfAttributes decode_nerf(const diff::Tensor& voxel_features, const DecoderParams& params);

/// (N,1) per-voxel opacity back to its (X,Y,Z) volume, flat order preserved.
diff::Tensor opacity_volume(const diff::Tensor& opacity, const geom::VoxelGridSpec& spec);

/// Per-voxel feature rows (N, C) from a (C, X, Y, Z) volume.
diff::Tensor voxels_to_rows(const diff::Tensor& volume);
/// Inverse of voxels_to_rows for a (N, C) row tensor.
diff::Tensor rows_to_voxels(const diff::Tensor& rows, const geom::VoxelGridSpec& spec);

}  // namespace ocrf::fields
