// SPDX-License-Identifier: Apache-2.0
//
// ocrf command line: scene synthesis, training, rendering, evaluation and
// the finite-difference gradient check suite.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "ocrf/io/blob.hpp"
#include "ocrf/io/image_io.hpp"
#include "ocrf/pipeline/checkpoint.hpp"
#include "ocrf/pipeline/config.hpp"
#include "ocrf/pipeline/gradcheck_suite.hpp"
#include "ocrf/pipeline/train.hpp"

namespace fs = std::filesystem;
using namespace ocrf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

struct CommonFlags {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::string out_dir = "out";
  std::optional<int64_t> steps;
  std::optional<std::string> ablation;
  std::optional<std::string> goal;
  std::optional<std::string> hoa;
  std::optional<std::string> depth;
  std::optional<int> k;
  std::optional<std::string> view;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "Run configuration file (key = value lines)");
  cmd->add_option("--seed", flags.seed, "Override the run seed");
  cmd->add_option("--out", flags.out_dir, "Output directory");
  cmd->add_option("--steps", flags.steps, "Override total training steps");
  cmd->add_option("--ablation", flags.ablation, "Radiance fields: hybrid, gs or nerf")
      ->check(CLI::IsMember({"hybrid", "gs", "nerf"}));
  cmd->add_option("--goal", flags.goal, "Optimization goal: scene, object or scene+object")
      ->check(CLI::IsMember({"scene", "object", "scene+object"}));
  cmd->add_option("--hoa", flags.hoa, "Opacity attention branch: on or off")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--depth-render", flags.depth, "Depth rendering loss: on or off")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--k", flags.k, "Height slice attention group count");
  cmd->add_option("--view", flags.view, "Rendered view per step: random or an index");
}

pipeline::RunConfig build_config(const CommonFlags& flags) {
  pipeline::RunConfig cfg;
  if (!flags.config_path.empty()) cfg = pipeline::RunConfig::load(flags.config_path);
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.steps) cfg.total_steps = *flags.steps;
  if (flags.ablation) {
    cfg.fields = *flags.ablation == "gs"     ? pipeline::FieldMode::kGaussian
                 : *flags.ablation == "nerf" ? pipeline::FieldMode::kNerf
                                             : pipeline::FieldMode::kHybrid;
  }
  if (flags.goal) {
    cfg.goal = *flags.goal == "scene"    ? pipeline::GoalMode::kScene
               : *flags.goal == "object" ? pipeline::GoalMode::kObject
                                         : pipeline::GoalMode::kSceneObject;
  }
  if (flags.hoa) cfg.hoa_enabled = *flags.hoa == "on";
  if (flags.depth) cfg.depth_render = *flags.depth == "on";
  if (flags.k) cfg.hsa_k = *flags.k;
  if (flags.view) {
    cfg.fixed_view = *flags.view == "random" ? -1 : std::stoi(*flags.view);
  }
  cfg.validate();
  return cfg;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void write_scene_dir(const scene::SyntheticScene& scn, const fs::path& dir) {
  fs::create_directories(dir);
  std::ostringstream manifest;
  manifest << "scene seed " << scn.seed << "\n";
  manifest << "boxes " << scn.boxes.size() << "\n";
  for (const auto& b : scn.boxes) {
    manifest << "box " << num(b.center.x) << " " << num(b.center.y) << " " << num(b.center.z)
             << " " << num(b.size.x) << " " << num(b.size.y) << " " << num(b.size.z) << " "
             << num(b.yaw) << " " << num(b.color[0]) << " " << num(b.color[1]) << " "
             << num(b.color[2]) << "\n";
  }
  manifest << "cameras " << scn.cameras.size() << "\n";
  for (const auto& c : scn.cameras) {
    manifest << "camera " << num(c.fx) << " " << num(c.fy) << " " << num(c.cx) << " "
             << num(c.cy) << " " << c.width << " " << c.height;
    for (double m : c.rotation.m) manifest << " " << num(m);
    manifest << " " << num(c.translation.x) << " " << num(c.translation.y) << " "
             << num(c.translation.z) << "\n";
  }
  manifest << "config\n" << "--\n";
  io::write_text_atomic(dir / "manifest.txt", manifest.str());

  std::ofstream cfg_out(dir / "scene_config.txt");
  cfg_out << "seed = " << scn.seed << "\n";

  for (std::size_t v = 0; v < scn.gt_rgb.size(); ++v) {
    const std::string stem = "view_" + std::to_string(v);
    io::write_f64_blob(dir / (stem + "_rgb.f64"), scn.gt_rgb[v].rgb);
    io::write_f64_blob(dir / (stem + "_depth.f64"), scn.gt_depth[v].d);
    io::write_ppm(dir / (stem + ".ppm"), scn.gt_rgb[v]);
    io::write_pgm16(dir / (stem + "_depth.pgm"), scn.gt_depth[v].height,
                    scn.gt_depth[v].width, scn.gt_depth[v].d, 1000.0);
    std::vector<double> mask(scn.masks2d[v].values.begin(), scn.masks2d[v].values.end());
    io::write_pgm16(dir / (stem + "_mask.pgm"), scn.masks2d[v].height, scn.masks2d[v].width,
                    mask, 65535.0);
  }
  io::write_f64_blob(dir / "raw_grid.f64", scn.raw_grid.values());
  std::vector<double> bev(scn.mask_bev.values.begin(), scn.mask_bev.values.end());
  io::write_pgm16(dir / "mask_bev.pgm", scn.mask_bev.nx, scn.mask_bev.ny, bev, 65535.0);
}

int cmd_synth(const CommonFlags& flags) {
  const pipeline::RunConfig cfg = build_config(flags);
  const auto pool = pipeline::make_scene_pool(cfg, /*heldout=*/false);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%03zu", i);
    write_scene_dir(pool[i], fs::path(flags.out_dir) / name);
  }
  std::cout << "wrote " << pool.size() << " scenes to " << flags.out_dir << "\n";
  return kExitOk;
}

int cmd_train(const CommonFlags& flags, const std::optional<std::string>& resume) {
  const pipeline::RunConfig cfg = build_config(flags);
  pipeline::TrainOptions opts;
  opts.out_dir = flags.out_dir;
  if (resume) opts.resume_from = fs::path(*resume);
  const pipeline::TrainResult result = pipeline::train(cfg, opts);
  std::cout << "trained " << result.state.step << " steps; metrics at "
            << result.metrics_csv.string() << "\n";
  if (!result.final_checkpoint.empty()) {
    std::cout << "checkpoint at " << result.final_checkpoint.string() << "\n";
  }
  return kExitOk;
}

int cmd_render(const CommonFlags& flags, const std::string& checkpoint, int scene_index,
               int view, const std::string& field) {
  const pipeline::RunConfig cfg = build_config(flags);
  pipeline::TrainState state = pipeline::TrainState::init(cfg);
  if (!checkpoint.empty()) pipeline::load_checkpoint(checkpoint, state);
  const auto pool = pipeline::make_scene_pool(cfg, /*heldout=*/false);
  if (scene_index < 0 || scene_index >= static_cast<int>(pool.size())) {
    throw std::invalid_argument("render: scene index out of range");
  }
  const auto& scn = pool[static_cast<std::size_t>(scene_index)];
  const pipeline::ViewRender vr = pipeline::render_view(state.model, scn, view, cfg);

  const render::RenderOutput* out = &vr.primary;
  if (field == "gs") {
    if (!vr.gaussian) throw std::invalid_argument("render: gs field disabled by config");
    out = &*vr.gaussian;
  } else if (field == "nerf") {
    if (!vr.nerf) throw std::invalid_argument("render: nerf field disabled by config");
    out = &*vr.nerf;
  }
  fs::create_directories(flags.out_dir);
  const fs::path img_path = fs::path(flags.out_dir) / "render.ppm";
  const fs::path dep_path = fs::path(flags.out_dir) / "render_depth.pgm";
  io::write_ppm(img_path, out->image);
  io::write_pgm16(dep_path, out->depth, 1000.0);  // millimeters
  std::cout << "wrote " << img_path.string() << " and " << dep_path.string() << "\n";
  return kExitOk;
}

int cmd_eval(const CommonFlags& flags, const std::string& checkpoint) {
  const pipeline::RunConfig cfg = build_config(flags);
  pipeline::TrainState state = pipeline::TrainState::init(cfg);
  if (!checkpoint.empty()) pipeline::load_checkpoint(checkpoint, state);
  const auto heldout = pipeline::make_scene_pool(cfg, /*heldout=*/true);
  const pipeline::EvalMetrics metrics = pipeline::evaluate(state, heldout);

  fs::create_directories(flags.out_dir);
  for (std::size_t i = 0; i < heldout.size(); ++i) {
    const auto& scn = heldout[i];
    bool query_from_nerf = false;
    const diff::Tensor pred =
        pipeline::predict_bev_mask(state.model, scn, cfg, &query_from_nerf);
    char name[48];
    std::snprintf(name, sizeof(name), "scene_%03zu_bev_mask.pgm", i);
    io::write_pgm16(fs::path(flags.out_dir) / name, pred, 65535.0);
    if (cfg.hoa_enabled && cfg.fields == pipeline::FieldMode::kHybrid) {
      const pipeline::DecodedFields dec = pipeline::decode_fields(state.model, scn, cfg);
      const diff::Tensor o_gs = fields::opacity_volume(dec.gauss->opacity, cfg.scene.grid);
      const diff::Tensor o_nerf = fields::opacity_volume(dec.nerf->opacity, cfg.scene.grid);
      const auto fused =
          hoa::opacity_fusion(o_gs, o_nerf, state.model.fusion.alpha_value(), state.model.hoa);
      const diff::Tensor maps =
          hoa::multiscale_hsa(fused.volume, cfg.hsa_k, state.model.hoa, cfg.hsa_multiscale);
      for (int g = 0; g < cfg.hsa_k; ++g) {
        std::snprintf(name, sizeof(name), "scene_%03zu_attn_%d.pgm", i, g);
        const diff::Tensor map = diff::reshape(diff::slice(maps, 0, g, 1),
                                               {maps.dim(1), maps.dim(2)});
        io::write_pgm16(fs::path(flags.out_dir) / name, map, 65535.0);
      }
    }
  }
  const fs::path csv_path = fs::path(flags.out_dir) / "eval.csv";
  std::ofstream csv(csv_path, std::ios::binary);
  csv << "scenes,fg_ssim,full_ssim,bev_iou\n";
  csv << metrics.scene_count << "," << num(metrics.fg_ssim) << "," << num(metrics.full_ssim)
      << "," << num(metrics.bev_iou) << "\n";
  std::cout << "fg_ssim " << num(metrics.fg_ssim) << " full_ssim " << num(metrics.full_ssim)
            << " bev_iou " << num(metrics.bev_iou) << "\n";
  return kExitOk;
}

int cmd_gradcheck() {
  const auto reports = pipeline::run_gradcheck_suite();
  double worst = 0.0;
  for (const auto& r : reports) {
    std::printf("%-32s max_rel_err %.3e\n", r.name.c_str(), r.max_rel_err);
    worst = std::max(worst, r.max_rel_err);
  }
  std::printf("worst %.3e (tolerance 1e-5)\n", worst);
  return worst < 1e-5 ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"object-centric radiance fields on synthetic scenes"};
  app.require_subcommand(1);

  CommonFlags synth_flags, train_flags, render_flags, eval_flags;
  std::optional<std::string> resume;
  std::string checkpoint;
  int scene_index = 0;
  int render_view_index = 0;
  std::string render_field = "fused";

  CLI::App* synth = app.add_subcommand("synth", "Write the synthetic scene pool to a directory");
  add_common(synth, synth_flags);

  CLI::App* train = app.add_subcommand("train", "Run the training loop");
  add_common(train, train_flags);
  train->add_option("--resume", resume, "Resume from a checkpoint manifest");

  CLI::App* render_cmd = app.add_subcommand("render", "Render one view from a checkpoint");
  add_common(render_cmd, render_flags);
  render_cmd->add_option("--checkpoint", checkpoint, "Checkpoint manifest to load");
  render_cmd->add_option("--scene", scene_index, "Scene index within the train pool");
  render_cmd->add_option("--render-view", render_view_index, "View index to render");
  render_cmd->add_option("--field", render_field, "Which output to write")
      ->check(CLI::IsMember({"fused", "gs", "nerf"}));

  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on held-out scenes");
  add_common(eval_cmd, eval_flags);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint manifest to load");

  app.add_subcommand("gradcheck", "Finite-difference check of every differentiable operation");

  try {
    app.parse(argc, argv);
    if (app.got_subcommand("synth")) return cmd_synth(synth_flags);
    if (app.got_subcommand("train")) return cmd_train(train_flags, resume);
    if (app.got_subcommand("render")) {
      return cmd_render(render_flags, checkpoint, scene_index, render_view_index, render_field);
    }
    if (app.got_subcommand("eval")) return cmd_eval(eval_flags, checkpoint);
    if (app.got_subcommand("gradcheck")) return cmd_gradcheck();
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  } catch (const pipeline::NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
