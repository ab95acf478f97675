// SPDX-License-Identifier: Apache-2.0
#include "ocrf/render/losses.hpp"

#include "ocrf/util/check.hpp"

namespace ocrf::render {

diff::Tensor image_to_tensor(const scene::Image& img) {
  return diff::Tensor::from_values({img.height, img.width, 3}, img.rgb);
}

diff::Tensor depth_to_tensor(const scene::DepthMap& depth) {
  return diff::Tensor::from_values({depth.height, depth.width}, depth.d);
}

diff::Tensor mask_to_tensor(const geom::Mask2D& mask, int channels) {
  if (channels == 1) {
    std::vector<double> v(mask.values.begin(), mask.values.end());
    return diff::Tensor::from_values({mask.height, mask.width}, std::move(v));
  }
  diff::Tensor t({mask.height, mask.width, channels});
  double* p = t.data();
  for (std::size_t i = 0; i < mask.values.size(); ++i) {
    for (int c = 0; c < channels; ++c) p[i * static_cast<std::size_t>(channels) + c] = mask.values[i];
  }
  return t;
}

diff::Tensor masked_mse(const std::vector<diff::Tensor>& preds, const diff::Tensor& gt,
                        const diff::Tensor& mask) {
  diff::Tensor acc = diff::Tensor::scalar(0.0);
  for (const diff::Tensor& pred : preds) {
    const diff::Tensor diff_masked = diff::mul(diff::sub(pred, gt), mask);
    acc = diff::add(acc, diff::mean_all(diff::square(diff_masked)));
  }
  return acc;
}

diff::Tensor masked_ssim(const std::vector<diff::Tensor>& preds, const diff::Tensor& gt,
                         const diff::Tensor& mask) {
  const diff::Tensor gt_masked = diff::mul(gt, mask);
  diff::Tensor acc = diff::Tensor::scalar(0.0);
  for (const diff::Tensor& pred : preds) {
    const diff::Tensor one = diff::Tensor::scalar(1.0);
    acc = diff::add(acc, diff::sub(one, ssim_value(diff::mul(pred, mask), gt_masked)));
  }
  return acc;
}

diff::Tensor masked_l1_depth(const std::vector<diff::Tensor>& preds, const diff::Tensor& gt,
                             const diff::Tensor& mask, double depth_scale) {
  if (depth_scale <= 0.0) util::fail_invalid("masked_l1_depth: depth_scale must be positive");
  const diff::Tensor gt_scaled = diff::scale(gt, 1.0 / depth_scale);
  diff::Tensor acc = diff::Tensor::scalar(0.0);
  for (const diff::Tensor& pred : preds) {
    const diff::Tensor pred_scaled = diff::scale(pred, 1.0 / depth_scale);
    const diff::Tensor diff_masked = diff::mul(diff::sub(pred_scaled, gt_scaled), mask);
    acc = diff::add(acc, diff::mean_all(diff::absval(diff_masked)));
  }
  return acc;
}

RenderLossTerms render_loss(const std::vector<diff::Tensor>& image_preds,
                            const std::vector<diff::Tensor>& depth_preds,
                            const scene::Image& gt_rgb, const scene::DepthMap& gt_depth,
                            const geom::Mask2D& object_mask, LossMode mode,
                            const LossWeights& weights, double depth_scale) {
  geom::Mask2D mask = object_mask;
  if (mode == LossMode::kSceneLevel) {
    mask = geom::Mask2D(gt_rgb.height, gt_rgb.width);
    std::fill(mask.values.begin(), mask.values.end(), uint8_t{1});
  }
  const diff::Tensor gt_img = image_to_tensor(gt_rgb);
  const diff::Tensor mask3 = mask_to_tensor(mask, 3);

  RenderLossTerms terms;
  terms.mse = masked_mse(image_preds, gt_img, mask3);
  terms.ssim = masked_ssim(image_preds, gt_img, mask3);
  if (!depth_preds.empty()) {
    const diff::Tensor gt_d = depth_to_tensor(gt_depth);
    const diff::Tensor mask1 = mask_to_tensor(mask, 1);
    terms.l1 = masked_l1_depth(depth_preds, gt_d, mask1, depth_scale);
  } else {
    terms.l1 = diff::Tensor::scalar(0.0);
  }
  terms.total = diff::add(diff::add(diff::scale(terms.mse, weights.mse),
                                    diff::scale(terms.ssim, weights.ssim)),
                          diff::scale(terms.l1, weights.l1));
  return terms;
}

}  // namespace ocrf::render
