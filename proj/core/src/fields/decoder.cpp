// SPDX-License-Identifier: Apache-2.0
#include "ocrf/fields/decoder.hpp"

#include <cmath>

#include "ocrf/util/check.hpp"

namespace ocrf::fields {

namespace {

diff::Tensor init_uniform(diff::Shape shape, double bound, util::Rng& rng) {
  diff::Tensor t(std::move(shape), 0.0, /*requires_grad=*/true);
  double* p = t.data();
  const int64_t n = t.numel();
  for (int64_t i = 0; i < n; ++i) p[i] = rng.uniform(-bound, bound);
  return t;
}

DecoderParams::Head init_head(int in, int hidden, int out, util::Rng& rng) {
  const double b1 = 1.0 / std::sqrt(static_cast<double>(in));
  const double b2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  DecoderParams::Head head;
  head.w1 = init_uniform({in, hidden}, b1, rng);
  head.b1 = init_uniform({hidden}, b1, rng);
  head.w2 = init_uniform({hidden, out}, b2, rng);
  head.b2 = init_uniform({out}, b2, rng);
  return head;
}

diff::Tensor run_head(const diff::Tensor& rows, const DecoderParams::Head& head) {
  const diff::Tensor hidden = diff::softplus(diff::linear(rows, head.w1, head.b1));
  return diff::linear(hidden, head.w2, head.b2);
}

}  // namespace

DecoderParams DecoderParams::init(int in_channels, int hidden, int views, util::Rng& rng) {
  if (in_channels < 1 || hidden < 1 || views < 1) {
    util::fail_invalid("decoder params: dims must be positive");
  }
  DecoderParams p;
  p.in_channels = in_channels;
  p.hidden = hidden;
  p.views = views;
  p.scale = init_head(in_channels, hidden, 3, rng);
  p.rotation = init_head(in_channels, hidden, 4, rng);
  p.opacity = init_head(in_channels, hidden, 1, rng);
  p.color = init_head(in_channels, hidden, 3, rng);
  p.density = init_head(in_channels, hidden, 1, rng);
  p.weight = init_head(in_channels, hidden, views, rng);
  return p;
}

diff::Tensor voxels_to_rows(const diff::Tensor& volume) {
  if (volume.rank() != 4) {
    util::fail_invalid("voxels_to_rows: expected (C,X,Y,Z), got " +
                       util::shape_str(volume.shape()));
  }
  const int64_t n = volume.dim(1) * volume.dim(2) * volume.dim(3);
  return diff::reshape(diff::permute(volume, {1, 2, 3, 0}), {n, volume.dim(0)});
}

diff::Tensor rows_to_voxels(const diff::Tensor& rows, const geom::VoxelGridSpec& spec) {
  if (rows.rank() != 2 || rows.dim(0) != spec.count()) {
    util::fail_invalid("rows_to_voxels: expected (" + std::to_string(spec.count()) +
                       ",C) rows, got " + util::shape_str(rows.shape()));
  }
  const diff::Tensor grid4 =
      diff::reshape(rows, {spec.nx, spec.ny, spec.nz, rows.dim(1)});
  return diff::permute(grid4, {3, 0, 1, 2});
}

GaussianAttributes decode_gaussians(const diff::Tensor& voxel_features,
                                    const DecoderParams& params,
                                    const geom::VoxelGridSpec& spec) {
  const diff::Tensor rows = voxels_to_rows(voxel_features);
  const int64_t n = rows.dim(0);
  if (n != spec.count()) {
    util::fail_invalid("decode_gaussians: feature count does not match the grid");
  }

  GaussianAttributes out;
  out.positions = diff::Tensor({n, 3});
  const auto centers = geom::voxel_centers(spec);
  double* pp = out.positions.data();
  for (int64_t i = 0; i < n; ++i) {
    pp[i * 3 + 0] = centers[static_cast<std::size_t>(i)].x;
    pp[i * 3 + 1] = centers[static_cast<std::size_t>(i)].y;
    pp[i * 3 + 2] = centers[static_cast<std::size_t>(i)].z;
  }
  out.scale = diff::softplus(run_head(rows, params.scale));
  out.rotation = diff::l2_normalize(run_head(rows, params.rotation), 1);
  out.opacity = diff::sigmoid(run_head(rows, params.opacity));
  out.color = diff::sigmoid(run_head(rows, params.color));
  return out;
}

NerfAttributes decode_nerf(const diff::Tensor& voxel_features, const DecoderParams& params) {
  const diff::Tensor rows = voxels_to_rows(voxel_features);
  NerfAttributes out;
  out.density = diff::softplus(run_head(rows, params.density));
  out.weight_logits = run_head(rows, params.weight);
  // o = 1 - e^(-d)
  const diff::Tensor ones(out.density.shape(), 1.0);
  out.opacity = diff::sub(ones, diff::exp(diff::scale(out.density, -1.0)));
  return out;
}

diff::Tensor opacity_volume(const diff::Tensor& opacity, const geom::VoxelGridSpec& spec) {
  if (opacity.rank() != 2 || opacity.dim(1) != 1 || opacity.dim(0) != spec.count()) {
    util::fail_invalid("opacity_volume: expected (" + std::to_string(spec.count()) +
                       ",1), got " + util::shape_str(opacity.shape()));
  }
  return diff::reshape(opacity, {spec.nx, spec.ny, spec.nz});
}

}  // namespace ocrf::fields
