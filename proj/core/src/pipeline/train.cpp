// SPDX-License-Identifier: Apache-2.0
#include "ocrf/pipeline/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "ocrf/pipeline/checkpoint.hpp"
#include "ocrf/util/check.hpp"

namespace ocrf::pipeline {

namespace {

diff::Tensor init_uniform(diff::Shape shape, double bound, util::Rng& rng) {
  diff::Tensor t(std::move(shape), 0.0, /*requires_grad=*/true);
  double* p = t.data();
  const int64_t n = t.numel();
  for (int64_t i = 0; i < n; ++i) p[i] = rng.uniform(-bound, bound);
  return t;
}

void register_head(ParamSet& params, const std::string& prefix,
                   const fields::DecoderParams::Head& head) {
  params.add(prefix + ".l1.weight", head.w1);
  params.add(prefix + ".l1.bias", head.b1);
  params.add(prefix + ".l2.weight", head.w2);
  params.add(prefix + ".l2.bias", head.b2);
}

std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

class MetricsCsv {
 public:
  explicit MetricsCsv(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) util::fail_invalid("cannot open metrics csv: " + path.string());
    out_ << "step,l_render,l_mse,l_ssim,l_l1,l_mask,alpha,fg_ssim,full_ssim,bev_iou\n";
  }
  void row(const StepInfo& info) {
    out_ << info.step << "," << csv_num(info.l_render) << "," << csv_num(info.l_mse) << ","
         << csv_num(info.l_ssim) << "," << csv_num(info.l_l1) << "," << csv_num(info.l_mask)
         << "," << csv_num(info.alpha) << "," << csv_num(info.fg_ssim) << ","
         << csv_num(info.full_ssim) << "," << csv_num(info.bev_iou) << "\n";
    out_.flush();
  }

 private:
  std::ofstream out_;
};

}  // namespace

Model Model::init(const RunConfig& cfg) {
  Model m;
  util::Rng rng(util::Rng::mix(cfg.seed, 0x5eed0));
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.scene.raw_channels));
  m.volproj_w = init_uniform({cfg.scene.raw_channels, cfg.voxel_channels}, bound, rng);
  m.volproj_b = init_uniform({cfg.voxel_channels}, bound, rng);
  m.decoder = fields::DecoderParams::init(cfg.voxel_channels, cfg.hidden_width,
                                          cfg.scene.camera_count, rng);
  m.fusion = render::FusionParams::init(0.0);
  m.hoa = hoa::HOAParams::init(cfg.scene.grid.nz, cfg.hsa_k, cfg.bev_channels,
                               cfg.voxel_channels, rng);

  m.params.add("volproj.weight", m.volproj_w);
  m.params.add("volproj.bias", m.volproj_b);
  register_head(m.params, "gauss.scale", m.decoder.scale);
  register_head(m.params, "gauss.rotation", m.decoder.rotation);
  register_head(m.params, "gauss.opacity", m.decoder.opacity);
  register_head(m.params, "gauss.color", m.decoder.color);
  register_head(m.params, "nerf.density", m.decoder.density);
  register_head(m.params, "nerf.weight", m.decoder.weight);
  m.params.add("fusion.theta", m.fusion.theta);
  m.params.add("hoa.ca.wq", m.hoa.wq);
  m.params.add("hoa.ca.wk", m.hoa.wk);
  m.params.add("hoa.ca.wv", m.hoa.wv);
  m.params.add("hoa.ca.wo", m.hoa.wo);
  for (int level = 0; level < hoa::kPyramidLevels; ++level) {
    for (int g = 0; g < cfg.hsa_k; ++g) {
      const std::string prefix =
          "hoa.hsa.l" + std::to_string(level) + ".g" + std::to_string(g);
      m.params.add(prefix + ".weight",
                   m.hoa.hsa[static_cast<std::size_t>(level)][static_cast<std::size_t>(g)].w);
      m.params.add(prefix + ".bias",
                   m.hoa.hsa[static_cast<std::size_t>(level)][static_cast<std::size_t>(g)].b);
    }
  }
  m.params.add("hoa.pyr1.weight", m.hoa.pyr1_w);
  m.params.add("hoa.pyr1.bias", m.hoa.pyr1_b);
  m.params.add("hoa.pyr2.weight", m.hoa.pyr2_w);
  m.params.add("hoa.pyr2.bias", m.hoa.pyr2_b);
  m.params.add("hoa.up2.weight", m.hoa.up2_w);
  m.params.add("hoa.up2.bias", m.hoa.up2_b);
  m.params.add("hoa.up1.weight", m.hoa.up1_w);
  m.params.add("hoa.up1.bias", m.hoa.up1_b);
  m.params.add("hoa.bev.weight", m.hoa.bev_w);
  m.params.add("hoa.bev.bias", m.hoa.bev_b);
  m.params.add("hoa.mask.weight", m.hoa.mask_w);
  m.params.add("hoa.mask.bias", m.hoa.mask_b);
  return m;
}

TrainState TrainState::init(const RunConfig& cfg) {
  cfg.validate();
  TrainState state;
  state.cfg = cfg;
  state.model = Model::init(cfg);
  state.step = 0;
  state.rng = util::Rng(util::Rng::mix(cfg.seed, 0x100f));
  return state;
}

std::vector<scene::SyntheticScene> make_scene_pool(const RunConfig& cfg, bool heldout) {
  const int count = heldout ? cfg.scene_pool_heldout : cfg.scene_pool_train;
  const uint64_t stream = heldout ? 0xeeee : 0x7777;
  std::vector<scene::SyntheticScene> pool;
  pool.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    scene::SceneConfig sc = cfg.scene;
    sc.seed = util::Rng::mix(cfg.seed, stream + static_cast<uint64_t>(i));
    pool.push_back(scene::generate_scene(sc));
  }
  return pool;
}

DecodedFields decode_fields(Model& model, const scene::SyntheticScene& scn,
                            const RunConfig& cfg) {
  DecodedFields out;
  const diff::Tensor raw_rows = fields::voxels_to_rows(scn.raw_grid);
  const diff::Tensor fv_rows = diff::linear(raw_rows, model.volproj_w, model.volproj_b);
  out.fv = fields::rows_to_voxels(fv_rows, cfg.scene.grid);
  if (cfg.fields != FieldMode::kNerf) {
    out.gauss = fields::decode_gaussians(out.fv, model.decoder, cfg.scene.grid);
  }
  if (cfg.fields != FieldMode::kGaussian) {
    out.nerf = fields::decode_nerf(out.fv, model.decoder);
  }
  return out;
}

ViewRender render_decoded(Model& model, const DecodedFields& dec,
                          const scene::SyntheticScene& scn, int view, const RunConfig& cfg) {
  if (view < 0 || view >= static_cast<int>(scn.cameras.size())) {
    util::fail_invalid("render: view index " + std::to_string(view) + " out of range");
  }
  ViewRender out;
  const geom::Camera& cam = scn.cameras[static_cast<std::size_t>(view)];
  if (dec.gauss) {
    render::SplatOptions sopts;
    sopts.disk_footprint = cfg.disk_footprint;
    out.gaussian = render::splat_render(*dec.gauss, cam, sopts);
  }
  if (dec.nerf) {
    render::SourceViews views{&scn.gt_rgb, &scn.cameras};
    out.nerf = render::volume_render(*dec.nerf, cam, views, cfg.scene.grid);
  }
  if (dec.gauss && dec.nerf) {
    out.primary = render::fuse(*out.gaussian, *out.nerf, model.fusion);
    out.image_preds = {out.gaussian->image, out.nerf->image, out.primary.image};
    if (cfg.depth_render) {
      out.depth_preds = {out.gaussian->depth, out.nerf->depth, out.primary.depth};
    }
  } else if (dec.gauss) {
    out.primary = *out.gaussian;
    out.image_preds = {out.gaussian->image};
    if (cfg.depth_render) out.depth_preds = {out.gaussian->depth};
  } else {
    out.primary = *out.nerf;
    out.image_preds = {out.nerf->image};
    if (cfg.depth_render) out.depth_preds = {out.nerf->depth};
  }
  return out;
}

diff::Tensor bev_mask_decoded(Model& model, const DecodedFields& dec, const RunConfig& cfg,
                              bool* query_from_nerf) {
  diff::Tensor bev = hoa::bev_from_voxels(dec.fv, model.hoa);
  if (cfg.hoa_enabled) {
    diff::Tensor fused_opacity;
    if (dec.gauss && dec.nerf) {
      const diff::Tensor o_gs = fields::opacity_volume(dec.gauss->opacity, cfg.scene.grid);
      const diff::Tensor o_nerf = fields::opacity_volume(dec.nerf->opacity, cfg.scene.grid);
      const hoa::OpacityFusionResult fused =
          hoa::opacity_fusion(o_gs, o_nerf, model.fusion.alpha_value(), model.hoa);
      fused_opacity = fused.volume;
      if (query_from_nerf) *query_from_nerf = fused.query_from_nerf;
    } else if (dec.gauss) {
      fused_opacity = fields::opacity_volume(dec.gauss->opacity, cfg.scene.grid);
    } else {
      fused_opacity = fields::opacity_volume(dec.nerf->opacity, cfg.scene.grid);
    }
    const diff::Tensor maps =
        hoa::multiscale_hsa(fused_opacity, cfg.hsa_k, model.hoa, cfg.hsa_multiscale);
    bev = hoa::apply_attention(bev, maps);
  }
  return hoa::bev_mask_head(bev, model.hoa);
}

ViewRender render_view(Model& model, const scene::SyntheticScene& scn, int view,
                       const RunConfig& cfg) {
  const DecodedFields dec = decode_fields(model, scn, cfg);
  return render_decoded(model, dec, scn, view, cfg);
}

diff::Tensor predict_bev_mask(Model& model, const scene::SyntheticScene& scn,
                              const RunConfig& cfg, bool* query_from_nerf) {
  const DecodedFields dec = decode_fields(model, scn, cfg);
  return bev_mask_decoded(model, dec, cfg, query_from_nerf);
}

double bev_iou(const diff::Tensor& pred, const geom::MaskBEV& gt, double threshold) {
  if (pred.rank() != 2 || pred.dim(0) != gt.nx || pred.dim(1) != gt.ny) {
    util::fail_invalid("bev_iou: prediction " + util::shape_str(pred.shape()) +
                       " does not match mask (" + std::to_string(gt.nx) + "," +
                       std::to_string(gt.ny) + ")");
  }
  const double* p = pred.data();
  int64_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    const bool a = p[i] >= threshold;
    const bool b = gt.values[i] != 0;
    inter += (a && b) ? 1 : 0;
    uni += (a || b) ? 1 : 0;
  }
  if (uni == 0) return 1.0;  // both empty: perfect by convention
  return static_cast<double>(inter) / static_cast<double>(uni);
}

render::LossMode loss_mode_for_step(const RunConfig& cfg, int64_t step) {
  switch (cfg.goal) {
    case GoalMode::kScene: return render::LossMode::kSceneLevel;
    case GoalMode::kObject: return render::LossMode::kObjectCentric;
    case GoalMode::kSceneObject:
      return step < cfg.warmup_steps ? render::LossMode::kSceneLevel
                                     : render::LossMode::kObjectCentric;
  }
  return render::LossMode::kSceneLevel;
}

namespace {

struct StepOutcome {
  StepInfo info;
  diff::Tensor loss;  // still attached to the step's tape
};

// Shared by the in-loop steps (under a tape) and the fixed final probe (no
// tape): forward, losses, and the detached quality metrics.
StepOutcome forward_step(TrainState& state, const scene::SyntheticScene& scn, int view,
                         render::LossMode mode) {
  const RunConfig& cfg = state.cfg;
  Model& model = state.model;
  StepOutcome out;
  const DecodedFields dec = decode_fields(model, scn, cfg);
  const ViewRender vr = render_decoded(model, dec, scn, view, cfg);
  const auto uview = static_cast<std::size_t>(view);
  const render::RenderLossTerms rl = render::render_loss(
      vr.image_preds, vr.depth_preds, scn.gt_rgb[uview], scn.gt_depth[uview],
      scn.masks2d[uview], mode, cfg.render_weights, cfg.scene.grid.diagonal());
  out.loss = rl.total;

  out.info.view = view;
  out.info.scene_seed = scn.seed;
  out.info.mode = mode;
  out.info.l_render = rl.total.item();
  out.info.l_mse = rl.mse.item();
  out.info.l_ssim = rl.ssim.item();
  out.info.l_l1 = rl.l1.item();
  out.info.alpha = model.fusion.alpha_value();

  diff::Tensor mask_pred;
  if (cfg.hoa_enabled) {
    mask_pred = bev_mask_decoded(model, dec, cfg);
    const hoa::MaskLossTerms ml =
        hoa::mask_loss(mask_pred, scn.mask_bev, cfg.lambda_bce, cfg.lambda_dice);
    out.info.l_mask = ml.total.item();
    out.loss = diff::add(out.loss, ml.total);
  }
  out.info.loss_total = out.loss.item();

  // Quality metrics on detached values; nothing below records onto the tape.
  const diff::Tensor primary = vr.primary.image.detach();
  const diff::Tensor gt = render::image_to_tensor(scn.gt_rgb[uview]);
  const diff::Tensor mask3 = render::mask_to_tensor(scn.masks2d[uview], 3);
  out.info.fg_ssim =
      render::ssim_value(diff::mul(primary, mask3), diff::mul(gt, mask3)).item();
  out.info.full_ssim = render::ssim_value(primary, gt).item();
  if (cfg.hoa_enabled) {
    out.info.bev_iou = bev_iou(mask_pred.detach(), scn.mask_bev);
  } else {
    // Column stays populated: run the (untrained) head without attention.
    diff::Tensor pred = bev_mask_decoded(model, dec, cfg);
    out.info.bev_iou = bev_iou(pred.detach(), scn.mask_bev);
  }
  return out;
}

}  // namespace

TrainResult train(const RunConfig& cfg, const TrainOptions& opts) {
  cfg.validate();
  std::filesystem::create_directories(opts.out_dir);

  TrainResult result;
  result.state = TrainState::init(cfg);
  TrainState& state = result.state;
  if (opts.resume_from) load_checkpoint(*opts.resume_from, state);

  const std::vector<scene::SyntheticScene> pool = make_scene_pool(cfg, /*heldout=*/false);
  result.metrics_csv = opts.out_dir / "metrics.csv";
  MetricsCsv csv(result.metrics_csv);

  while (state.step < cfg.total_steps) {
    const int64_t step = state.step;
    const scene::SyntheticScene& scn =
        pool[static_cast<std::size_t>(step % static_cast<int64_t>(pool.size()))];
    const int view = cfg.fixed_view >= 0
                         ? cfg.fixed_view
                         : static_cast<int>(state.rng.uniform_int(cfg.scene.camera_count));
    const render::LossMode mode = loss_mode_for_step(cfg, step);

    StepInfo info;
    {
      diff::Tape tape;
      diff::TapeScope scope(tape);
      StepOutcome outcome = forward_step(state, scn, view, mode);
      info = outcome.info;
      info.step = step;
      if (!std::isfinite(info.loss_total)) {
        save_checkpoint(state, opts.out_dir / "abort.ckpt");
        throw NumericalError("non-finite loss at step " + std::to_string(step) +
                             " (scene seed " + std::to_string(scn.seed) + "); state dumped to " +
                             (opts.out_dir / "abort.ckpt").string());
      }
      tape.backward(outcome.loss);
    }
    state.model.params.adam_step(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                                 cfg.adam_eps, step + 1);
    state.step = step + 1;

    if (step % cfg.metrics_every == 0) csv.row(info);
    if (opts.observer) opts.observer(info);
  }

  if (cfg.total_steps > 0) {
    // Fixed probe (view 0, no RNG draw) so the post-training loss is on record.
    const scene::SyntheticScene& scn = pool[static_cast<std::size_t>(
        cfg.total_steps % static_cast<int64_t>(pool.size()))];
    StepOutcome probe =
        forward_step(state, scn, 0, loss_mode_for_step(cfg, cfg.total_steps));
    probe.info.step = cfg.total_steps;
    csv.row(probe.info);
  }

  if (opts.write_final_checkpoint) {
    result.final_checkpoint = opts.out_dir / "final.ckpt";
    save_checkpoint(state, result.final_checkpoint);
  }
  return result;
}

EvalMetrics evaluate(TrainState& state, const std::vector<scene::SyntheticScene>& scenes) {
  EvalMetrics out;
  if (scenes.empty()) return out;
  const RunConfig& cfg = state.cfg;
  double fg = 0.0, full = 0.0, iou = 0.0;
  int64_t view_count = 0;
  for (const scene::SyntheticScene& scn : scenes) {
    const DecodedFields dec = decode_fields(state.model, scn, cfg);
    const diff::Tensor pred = bev_mask_decoded(state.model, dec, cfg);
    iou += bev_iou(pred, scn.mask_bev);
    for (int v = 0; v < static_cast<int>(scn.cameras.size()); ++v) {
      const ViewRender vr = render_decoded(state.model, dec, scn, v, cfg);
      const auto uv = static_cast<std::size_t>(v);
      const diff::Tensor gt = render::image_to_tensor(scn.gt_rgb[uv]);
      const diff::Tensor mask3 = render::mask_to_tensor(scn.masks2d[uv], 3);
      fg += render::ssim_value(diff::mul(vr.primary.image, mask3), diff::mul(gt, mask3)).item();
      full += render::ssim_value(vr.primary.image, gt).item();
      ++view_count;
    }
  }
  out.scene_count = static_cast<int64_t>(scenes.size());
  out.bev_iou = iou / static_cast<double>(scenes.size());
  out.fg_ssim = fg / static_cast<double>(view_count);
  out.full_ssim = full / static_cast<double>(view_count);
  return out;
}

}  // namespace ocrf::pipeline
