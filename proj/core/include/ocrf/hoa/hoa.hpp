// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "ocrf/diff/ops.hpp"
#include "ocrf/diff/tensor.hpp"
#include "ocrf/geom/masks.hpp"
#include "ocrf/util/rng.hpp"

namespace ocrf::hoa {

inline constexpr int kPyramidLevels = 3;

/// Parameters of the full HOA stack: cross-attention projections, the
/// per-level/per-group height-slice convolutions, the opacity pyramid, the
/// BEV reducer and the mask head.
struct HOAParams {
  int depth = 0;         // Z, the height-column feature dim
  int groups = 0;        // k
  int bev_channels = 0;  // C
  int in_channels = 0;   // C_v

  diff::Tensor wq, wk, wv, wo;  // (Z,Z) projection matrices

  struct GroupConv {
    diff::Tensor w, b;  // scalar 1x1 conv per height group
  };
  std::vector<std::vector<GroupConv>> hsa;  // [level][group]

  diff::Tensor pyr1_w, pyr1_b;  // (Z,Z,3,3) stride-2
  diff::Tensor pyr2_w, pyr2_b;
  diff::Tensor up2_w, up2_b;  // (k,k,3,3) stride-2 transposed
  diff::Tensor up1_w, up1_b;

  diff::Tensor bev_w, bev_b;    // (C, C_v, 1, 1)
  diff::Tensor mask_w, mask_b;  // (1, C, 1, 1)

  static HOAParams init(int depth, int groups, int bev_channels, int in_channels,
                        util::Rng& rng);
};

struct OpacityFusionResult {
  diff::Tensor volume;       // (X,Y,Z), sigmoid range
  bool query_from_nerf = false;
};

/// Raw scaled dot-product cross-attention over height-column tokens.
/// q/k/v are (T, Z); returns the projected+sigmoided output and, when
/// `attention_out` is non-null, the softmaxed (T,T) attention weights.
diff::Tensor cross_attention(const diff::Tensor& q_tokens, const diff::Tensor& k_tokens,
                             const diff::Tensor& v_tokens, const HOAParams& params,
                             diff::Tensor* attention_out = nullptr);

/// Fuses the two opacity volumes; the field with the larger fusion weight
/// supplies the query (alpha <= beta routes the query to the NeRF side).
OpacityFusionResult opacity_fusion(const diff::Tensor& o_gs, const diff::Tensor& o_nerf,
                                   double alpha, const HOAParams& params);

/// Height slice attention at one pyramid level. `volume` is (Z', X', Y') with
/// Z' = depth channels; output is the pre-activation (k, X', Y') stack of
/// per-group max-pool + scalar conv maps, concatenated in height order.
diff::Tensor hsa(const diff::Tensor& volume, int groups, const HOAParams& params, int level);

/// Three-level opacity pyramid with level-wise HSA and additive transposed-
/// conv cascade; final sigmoid maps into (0,1). `o_f` is (X,Y,Z).
diff::Tensor multiscale_hsa(const diff::Tensor& o_f, int groups, const HOAParams& params,
                            bool multiscale = true);

/// Collapse (C_v,X,Y,Z) voxel features over height and reduce to C channels.
diff::Tensor bev_from_voxels(const diff::Tensor& voxel_features, const HOAParams& params);

/// Multiplies channel block i (of C/k contiguous channels) by attention map i.
diff::Tensor apply_attention(const diff::Tensor& bev, const diff::Tensor& maps);

/// 1x1 conv C -> 1 plus sigmoid; returns an (X,Y) probability map.
diff::Tensor bev_mask_head(const diff::Tensor& bev, const HOAParams& params);

struct MaskLossTerms {
  diff::Tensor total;
  diff::Tensor bce;
  diff::Tensor dice;
};

/// lambda_bce * BCE + lambda_dice * Dice with eps = 1; probabilities are
/// clamped to [1e-7, 1-1e-7] for the BCE log.
MaskLossTerms mask_loss(const diff::Tensor& pred, const geom::MaskBEV& gt, double lambda_bce,
                        double lambda_dice);

}  // namespace ocrf::hoa
