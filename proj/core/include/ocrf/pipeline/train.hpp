// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ocrf/fields/decoder.hpp"
#include "ocrf/hoa/hoa.hpp"
#include "ocrf/pipeline/config.hpp"
#include "ocrf/pipeline/params.hpp"
#include "ocrf/render/losses.hpp"
#include "ocrf/render/render.hpp"
#include "ocrf/util/rng.hpp"

namespace ocrf::pipeline {

/// Thrown when a training step produces a non-finite loss; the message names
/// the step and the offending scene seed.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// All learnable state. The ParamSet entries alias the module tensors, so the
/// optimizer and checkpoint layers see every parameter exactly once, in a
/// fixed order.
struct Model {
  diff::Tensor volproj_w, volproj_b;  // raw grid -> F_v, 1x1 volumetric projection
  fields::DecoderParams decoder;
  render::FusionParams fusion;
  hoa::HOAParams hoa;
  ParamSet params;

  static Model init(const RunConfig& cfg);
};

struct TrainState {
  RunConfig cfg;
  Model model;
  int64_t step = 0;
  util::Rng rng{1};

  static TrainState init(const RunConfig& cfg);
};

/// Scene pools are derived deterministically from the run seed.
std::vector<scene::SyntheticScene> make_scene_pool(const RunConfig& cfg, bool heldout);

/// One volumetric projection plus the per-config field decodes, shared by the
/// rendering and BEV branches of a step.
struct DecodedFields {
  diff::Tensor fv;  // (C_v,X,Y,Z)
  std::optional<fields::GaussianAttributes> gauss;
  std::optional<fields::NerfAttributes> nerf;
};

DecodedFields decode_fields(Model& model, const scene::SyntheticScene& scn,
                            const RunConfig& cfg);

struct ViewRender {
  std::optional<render::RenderOutput> gaussian;
  std::optional<render::RenderOutput> nerf;
  render::RenderOutput primary;  // fused for hybrid, the single field otherwise
  std::vector<diff::Tensor> image_preds;
  std::vector<diff::Tensor> depth_preds;
};

ViewRender render_decoded(Model& model, const DecodedFields& dec,
                          const scene::SyntheticScene& scn, int view, const RunConfig& cfg);

/// BEV branch: collapse features, refine by opacity attention when HOA is
/// enabled, and predict the mask probability map.
diff::Tensor bev_mask_decoded(Model& model, const DecodedFields& dec, const RunConfig& cfg,
                              bool* query_from_nerf = nullptr);

/// Convenience wrappers decoding from scratch.
ViewRender render_view(Model& model, const scene::SyntheticScene& scn, int view,
                       const RunConfig& cfg);
diff::Tensor predict_bev_mask(Model& model, const scene::SyntheticScene& scn,
                              const RunConfig& cfg, bool* query_from_nerf = nullptr);

/// IoU of (pred >= threshold) vs gt; both-empty masks count as IoU 1.
double bev_iou(const diff::Tensor& pred, const geom::MaskBEV& gt, double threshold = 0.5);

render::LossMode loss_mode_for_step(const RunConfig& cfg, int64_t step);

struct StepInfo {
  int64_t step = 0;
  uint64_t scene_seed = 0;
  int view = 0;
  render::LossMode mode = render::LossMode::kSceneLevel;
  double loss_total = 0.0;
  double l_render = 0.0, l_mse = 0.0, l_ssim = 0.0, l_l1 = 0.0, l_mask = 0.0;
  double alpha = 0.0;
  double fg_ssim = 0.0, full_ssim = 0.0, bev_iou = 0.0;
};

using StepObserver = std::function<void(const StepInfo&)>;

struct TrainOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume_from;
  bool write_final_checkpoint = true;
  StepObserver observer;
};

struct TrainResult {
  TrainState state;
  std::filesystem::path metrics_csv;
  std::filesystem::path final_checkpoint;  // empty when disabled
};

/// Runs the loop: cycle the train pool, render one (random) view per step,
/// scene-level mask during warm-up then object-centric (per goal), HOA + mask
/// loss when enabled, Adam updates. Metrics rows carry each step's forward
/// losses every cfg.metrics_every steps; one final fixed-probe row (view 0)
/// is appended at step T so the post-training loss is on record.
TrainResult train(const RunConfig& cfg, const TrainOptions& opts);

struct EvalMetrics {
  double fg_ssim = 0.0;
  double full_ssim = 0.0;
  double bev_iou = 0.0;
  int64_t scene_count = 0;
};

/// Held-out aggregate: SSIM of the primary render averaged over scenes and
/// views, BEV IoU at threshold 0.5 averaged over scenes.
EvalMetrics evaluate(TrainState& state, const std::vector<scene::SyntheticScene>& scenes);

}  // namespace ocrf::pipeline
