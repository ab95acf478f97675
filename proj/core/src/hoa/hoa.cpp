// SPDX-License-Identifier: Apache-2.0
#include "ocrf/hoa/hoa.hpp"

#include <cmath>

#include "ocrf/util/check.hpp"

namespace ocrf::hoa {

namespace {

diff::Tensor init_uniform(diff::Shape shape, double bound, util::Rng& rng) {
  diff::Tensor t(std::move(shape), 0.0, /*requires_grad=*/true);
  double* p = t.data();
  const int64_t n = t.numel();
  for (int64_t i = 0; i < n; ++i) p[i] = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

HOAParams HOAParams::init(int depth, int groups, int bev_channels, int in_channels,
                          util::Rng& rng) {
  if (depth < 1 || groups < 1 || bev_channels < 1 || in_channels < 1) {
    util::fail_invalid("hoa params: dims must be positive");
  }
  if (depth % groups != 0) {
    util::fail_invalid("hoa params: k = " + std::to_string(groups) + " does not divide Z = " +
                       std::to_string(depth));
  }
  if (bev_channels % groups != 0) {
    util::fail_invalid("hoa params: k = " + std::to_string(groups) +
                       " does not divide C = " + std::to_string(bev_channels));
  }
  HOAParams p;
  p.depth = depth;
  p.groups = groups;
  p.bev_channels = bev_channels;
  p.in_channels = in_channels;

  const double bz = 1.0 / std::sqrt(static_cast<double>(depth));
  p.wq = init_uniform({depth, depth}, bz, rng);
  p.wk = init_uniform({depth, depth}, bz, rng);
  p.wv = init_uniform({depth, depth}, bz, rng);
  p.wo = init_uniform({depth, depth}, bz, rng);

  p.hsa.resize(kPyramidLevels);
  for (int level = 0; level < kPyramidLevels; ++level) {
    for (int g = 0; g < groups; ++g) {
      GroupConv gc;
      gc.w = init_uniform({1}, 1.0, rng);
      gc.b = init_uniform({1}, 1.0, rng);
      p.hsa[static_cast<std::size_t>(level)].push_back(gc);
    }
  }

  const double bpyr = 1.0 / std::sqrt(static_cast<double>(depth) * 9.0);
  p.pyr1_w = init_uniform({depth, depth, 3, 3}, bpyr, rng);
  p.pyr1_b = init_uniform({depth}, bpyr, rng);
  p.pyr2_w = init_uniform({depth, depth, 3, 3}, bpyr, rng);
  p.pyr2_b = init_uniform({depth}, bpyr, rng);
  const double bup = 1.0 / std::sqrt(static_cast<double>(groups) * 9.0);
  p.up2_w = init_uniform({groups, groups, 3, 3}, bup, rng);
  p.up2_b = init_uniform({groups}, bup, rng);
  p.up1_w = init_uniform({groups, groups, 3, 3}, bup, rng);
  p.up1_b = init_uniform({groups}, bup, rng);

  const double bbev = 1.0 / std::sqrt(static_cast<double>(in_channels));
  p.bev_w = init_uniform({bev_channels, in_channels, 1, 1}, bbev, rng);
  p.bev_b = init_uniform({bev_channels}, bbev, rng);
  const double bmask = 1.0 / std::sqrt(static_cast<double>(bev_channels));
  p.mask_w = init_uniform({1, bev_channels, 1, 1}, bmask, rng);
  p.mask_b = init_uniform({1}, bmask, rng);
  return p;
}

diff::Tensor cross_attention(const diff::Tensor& q_tokens, const diff::Tensor& k_tokens,
                             const diff::Tensor& v_tokens, const HOAParams& params,
                             diff::Tensor* attention_out) {
  if (q_tokens.rank() != 2 || q_tokens.dim(1) != params.depth) {
    util::fail_invalid("cross_attention: query tokens " + util::shape_str(q_tokens.shape()) +
                       " do not match depth " + std::to_string(params.depth));
  }
  if (k_tokens.shape() != v_tokens.shape() || k_tokens.dim(1) != params.depth) {
    util::fail_invalid("cross_attention: key/value tokens mismatch " +
                       util::shape_str(k_tokens.shape()) + " vs " +
                       util::shape_str(v_tokens.shape()));
  }
  const diff::Tensor q = diff::matmul(q_tokens, params.wq);
  const diff::Tensor k = diff::matmul(k_tokens, params.wk);
  const diff::Tensor v = diff::matmul(v_tokens, params.wv);
  const diff::Tensor scores =
      diff::scale(diff::matmul(q, diff::permute(k, {1, 0})),
                  1.0 / std::sqrt(static_cast<double>(params.depth)));
  const diff::Tensor attn = diff::softmax(scores, 1);
  if (attention_out) *attention_out = attn;
  const diff::Tensor mixed = diff::matmul(attn, v);
  return diff::sigmoid(diff::matmul(mixed, params.wo));
}

OpacityFusionResult opacity_fusion(const diff::Tensor& o_gs, const diff::Tensor& o_nerf,
                                   double alpha, const HOAParams& params) {
  if (o_gs.shape() != o_nerf.shape()) {
    util::fail_invalid("opacity_fusion: shape mismatch " + util::shape_str(o_gs.shape()) +
                       " vs " + util::shape_str(o_nerf.shape()));
  }
  if (o_gs.rank() != 3 || o_gs.dim(2) != params.depth) {
    util::fail_invalid("opacity_fusion: expected (X,Y,Z) volumes with Z = " +
                       std::to_string(params.depth) + ", got " + util::shape_str(o_gs.shape()));
  }
  const int64_t tokens = o_gs.dim(0) * o_gs.dim(1);
  const diff::Tensor gs_tok = diff::reshape(o_gs, {tokens, params.depth});
  const diff::Tensor nerf_tok = diff::reshape(o_nerf, {tokens, params.depth});

  OpacityFusionResult result;
  const double beta = 1.0 - alpha;
  // The better-rendering field (larger fusion weight) supplies the query; a
  // tie routes the query to the NeRF side.
  result.query_from_nerf = alpha <= beta;
  const diff::Tensor fused =
      result.query_from_nerf ? cross_attention(nerf_tok, gs_tok, gs_tok, params)
                             : cross_attention(gs_tok, nerf_tok, nerf_tok, params);
  result.volume = diff::reshape(fused, {o_gs.dim(0), o_gs.dim(1), o_gs.dim(2)});
  return result;
}

diff::Tensor hsa(const diff::Tensor& volume, int groups, const HOAParams& params, int level) {
  if (volume.rank() != 3) {
    util::fail_invalid("hsa: expected (Z,X,Y) input, got " + util::shape_str(volume.shape()));
  }
  const int64_t depth = volume.dim(0);
  if (groups < 1 || depth % groups != 0) {
    util::fail_invalid("hsa: k = " + std::to_string(groups) + " does not divide Z = " +
                       std::to_string(depth));
  }
  if (level < 0 || level >= kPyramidLevels) {
    util::fail_invalid("hsa: level " + std::to_string(level) + " out of range");
  }
  const int64_t per_group = depth / groups;
  std::vector<diff::Tensor> maps;
  maps.reserve(static_cast<std::size_t>(groups));
  for (int g = 0; g < groups; ++g) {
    const diff::Tensor group = diff::slice(volume, 0, g * per_group, per_group);
    const diff::Tensor pooled = diff::reduce_max_axis(group, 0);  // (X,Y)
    const auto& conv = params.hsa[static_cast<std::size_t>(level)][static_cast<std::size_t>(g)];
    const diff::Tensor mapped = diff::add_scalar_t(diff::scale_by(pooled, conv.w), conv.b);
    maps.push_back(diff::reshape(mapped, {1, volume.dim(1), volume.dim(2)}));
  }
  return diff::concat(maps, 0);
}

diff::Tensor multiscale_hsa(const diff::Tensor& o_f, int groups, const HOAParams& params,
                            bool multiscale) {
  if (o_f.rank() != 3 || o_f.dim(2) != params.depth) {
    util::fail_invalid("multiscale_hsa: expected (X,Y,Z) volume, got " +
                       util::shape_str(o_f.shape()));
  }
  if (o_f.dim(0) % 4 != 0 || o_f.dim(1) % 4 != 0) {
    util::fail_invalid("multiscale_hsa: X and Y must be divisible by 4, got " +
                       util::shape_str(o_f.shape()));
  }
  const diff::Tensor p0 = diff::permute(o_f, {2, 0, 1});  // (Z,X,Y)
  const diff::Tensor m0 = hsa(p0, groups, params, 0);
  if (!multiscale) return diff::sigmoid(m0);

  const diff::Tensor p1 = diff::conv2d(p0, params.pyr1_w, &params.pyr1_b, 2, 1);
  const diff::Tensor p2 = diff::conv2d(p1, params.pyr2_w, &params.pyr2_b, 2, 1);
  const diff::Tensor m1 = hsa(p1, groups, params, 1);
  const diff::Tensor m2 = hsa(p2, groups, params, 2);

  const diff::Tensor u2 =
      diff::add(diff::conv_transpose2d(m2, params.up2_w, &params.up2_b, 2, 1, 1), m1);
  const diff::Tensor u1 =
      diff::add(diff::conv_transpose2d(u2, params.up1_w, &params.up1_b, 2, 1, 1), m0);
  return diff::sigmoid(u1);
}

diff::Tensor bev_from_voxels(const diff::Tensor& voxel_features, const HOAParams& params) {
  if (voxel_features.rank() != 4 || voxel_features.dim(0) != params.in_channels) {
    util::fail_invalid("bev_from_voxels: expected (C_v,X,Y,Z) features, got " +
                       util::shape_str(voxel_features.shape()));
  }
  const diff::Tensor collapsed = diff::sum_axis(voxel_features, 3);  // (C_v,X,Y)
  return diff::conv2d(collapsed, params.bev_w, &params.bev_b, 1, 0);
}

diff::Tensor apply_attention(const diff::Tensor& bev, const diff::Tensor& maps) {
  if (bev.rank() != 3 || maps.rank() != 3 || bev.dim(1) != maps.dim(1) ||
      bev.dim(2) != maps.dim(2)) {
    util::fail_invalid("apply_attention: incompatible shapes " + util::shape_str(bev.shape()) +
                       " vs " + util::shape_str(maps.shape()));
  }
  const int64_t channels = bev.dim(0);
  const int64_t groups = maps.dim(0);
  if (channels % groups != 0) {
    util::fail_invalid("apply_attention: k = " + std::to_string(groups) +
                       " does not divide C = " + std::to_string(channels));
  }
  const int64_t block = channels / groups;
  std::vector<diff::Tensor> scaled;
  scaled.reserve(static_cast<std::size_t>(groups));
  for (int64_t g = 0; g < groups; ++g) {
    const diff::Tensor chunk = diff::slice(bev, 0, g * block, block);
    const diff::Tensor map = diff::slice(maps, 0, g, 1);
    std::vector<diff::Tensor> tiles(static_cast<std::size_t>(block), map);
    scaled.push_back(diff::mul(chunk, diff::concat(tiles, 0)));
  }
  return diff::concat(scaled, 0);
}

diff::Tensor bev_mask_head(const diff::Tensor& bev, const HOAParams& params) {
  if (bev.rank() != 3 || bev.dim(0) != params.bev_channels) {
    util::fail_invalid("bev_mask_head: expected (C,X,Y) features, got " +
                       util::shape_str(bev.shape()));
  }
  const diff::Tensor logits = diff::conv2d(bev, params.mask_w, &params.mask_b, 1, 0);
  return diff::reshape(diff::sigmoid(logits), {bev.dim(1), bev.dim(2)});
}

MaskLossTerms mask_loss(const diff::Tensor& pred, const geom::MaskBEV& gt, double lambda_bce,
                        double lambda_dice) {
  if (pred.rank() != 2 || pred.dim(0) != gt.nx || pred.dim(1) != gt.ny) {
    util::fail_invalid("mask_loss: prediction " + util::shape_str(pred.shape()) +
                       " does not match mask (" + std::to_string(gt.nx) + "," +
                       std::to_string(gt.ny) + ")");
  }
  std::vector<double> gtv(gt.values.begin(), gt.values.end());
  const diff::Tensor target = diff::Tensor::from_values(pred.shape(), std::move(gtv));
  const diff::Tensor ones(pred.shape(), 1.0);

  constexpr double kFloor = 1e-7;
  const diff::Tensor p = diff::clamp(pred, kFloor, 1.0 - kFloor);
  const diff::Tensor bce_terms = diff::add(diff::mul(target, diff::log(p)),
                                           diff::mul(diff::sub(ones, target),
                                                     diff::log(diff::sub(ones, p))));
  MaskLossTerms out;
  out.bce = diff::scale(diff::mean_all(bce_terms), -1.0);

  constexpr double kEps = 1.0;
  const diff::Tensor inter = diff::sum_all(diff::mul(pred, target));
  const diff::Tensor denom = diff::add_scalar(
      diff::add(diff::sum_all(pred), diff::sum_all(target)), kEps);
  const diff::Tensor dice_score =
      diff::divide(diff::add_scalar(diff::scale(inter, 2.0), kEps), denom);
  out.dice = diff::sub(diff::Tensor::scalar(1.0), dice_score);

  out.total = diff::add(diff::scale(out.bce, lambda_bce), diff::scale(out.dice, lambda_dice));
  return out;
}

}  // namespace ocrf::hoa
