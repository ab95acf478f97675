// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "ocrf/diff/tensor.hpp"
#include "ocrf/geom/masks.hpp"
#include "ocrf/render/render.hpp"
#include "ocrf/scene/image.hpp"

namespace ocrf::render {

struct LossWeights {
  double mse = 10.0;
  double ssim = 1.0;
  double l1 = 1.0;
};

/// Mean SSIM between two (H,W,3) or (H,W) tensors: 11x11 Gaussian window with
/// sigma 1.5, C1 = 0.01^2, C2 = 0.03^2 at dynamic range 1. The window is
/// applied in valid mode (no padding) and the map is averaged over the valid
/// region, so both extents must be >= 11.
diff::Tensor ssim_value(const diff::Tensor& a, const diff::Tensor& b);

diff::Tensor image_to_tensor(const scene::Image& img);
diff::Tensor depth_to_tensor(const scene::DepthMap& depth);
/// Mask replicated over channels: (H,W,3) for channels=3, (H,W) for 1.
diff::Tensor mask_to_tensor(const geom::Mask2D& mask, int channels);

/// Sum over predictions of mean_{H*W*C} [(pred - gt) * mask]^2.
diff::Tensor masked_mse(const std::vector<diff::Tensor>& preds, const diff::Tensor& gt,
                        const diff::Tensor& mask);

/// Sum over predictions of 1 - SSIM(pred * mask, gt * mask).
diff::Tensor masked_ssim(const std::vector<diff::Tensor>& preds, const diff::Tensor& gt,
                         const diff::Tensor& mask);

/// Sum over predictions of mean_{H*W} |pred - gt| * mask, with depths divided
/// by depth_scale (the perception-range diagonal in the pipeline) first.
diff::Tensor masked_l1_depth(const std::vector<diff::Tensor>& preds, const diff::Tensor& gt,
                             const diff::Tensor& mask, double depth_scale = 1.0);

enum class LossMode { kSceneLevel, kObjectCentric };

struct RenderLossTerms {
  diff::Tensor total;
  diff::Tensor mse;
  diff::Tensor ssim;
  diff::Tensor l1;
};

/// lambda_mse * L_mse + lambda_ssim * L_ssim + lambda_l1 * L_l1 over the given
/// predictions. Scene-level mode uses an all-ones mask; object-centric uses
/// the union of projected box masks for the view. Depth predictions may be
/// empty (depth rendering disabled), dropping the L1 term.
RenderLossTerms render_loss(const std::vector<diff::Tensor>& image_preds,
                            const std::vector<diff::Tensor>& depth_preds,
                            const scene::Image& gt_rgb, const scene::DepthMap& gt_depth,
                            const geom::Mask2D& object_mask, LossMode mode,
                            const LossWeights& weights, double depth_scale);

}  // namespace ocrf::render
