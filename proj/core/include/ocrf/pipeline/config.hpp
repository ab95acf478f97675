// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ocrf/render/losses.hpp"
#include "ocrf/scene/scene.hpp"

namespace ocrf::pipeline {

enum class FieldMode { kHybrid, kGaussian, kNerf };
enum class GoalMode { kScene, kObject, kSceneObject };

struct RunConfig {
  uint64_t seed = 1;
  scene::SceneConfig scene;

  int scene_pool_train = 8;
  int scene_pool_heldout = 4;

  int voxel_channels = 16;  // C_v
  int hidden_width = 32;
  int bev_channels = 16;  // C
  int hsa_k = 4;

  render::LossWeights render_weights;  // 10, 1, 1
  double lambda_bce = 10.0;
  double lambda_dice = 10.0;

  double learning_rate = 4e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  int64_t warmup_steps = 200;
  int64_t total_steps = 2000;
  int64_t metrics_every = 10;

  bool hoa_enabled = true;
  bool hsa_multiscale = true;
  FieldMode fields = FieldMode::kHybrid;
  GoalMode goal = GoalMode::kSceneObject;
  bool depth_render = true;
  bool disk_footprint = false;
  int fixed_view = -1;  // -1 = random per step

  void validate() const;

  /// Canonical `key = value` text; parse(to_text()) round-trips.
  std::string to_text() const;
  /// FNV-1a over the canonical text minus the runtime-only keys
  /// (total_steps), so a checkpoint can be resumed with a new step budget.
  uint64_t structural_hash() const;

  static RunConfig parse_text(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
};

std::string field_mode_name(FieldMode mode);
std::string goal_mode_name(GoalMode mode);

}  // namespace ocrf::pipeline
