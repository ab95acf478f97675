// SPDX-License-Identifier: Apache-2.0
#include "ocrf/pipeline/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "ocrf/util/check.hpp"

namespace ocrf::pipeline {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

struct Parser {
  std::map<std::string, std::string> kv;
  std::map<std::string, bool> used;

  double number(const std::string& key, double fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    used[key] = true;
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (trim(it->second.substr(pos)).empty()) return v;
    } catch (...) {
    }
    util::fail_invalid("config: key '" + key + "' has non-numeric value '" + it->second + "'");
  }

  int64_t integer(const std::string& key, int64_t fallback) {
    const double v = number(key, static_cast<double>(fallback));
    const auto r = static_cast<int64_t>(std::llround(v));
    if (static_cast<double>(r) != v) {
      util::fail_invalid("config: key '" + key + "' must be an integer");
    }
    return r;
  }

  std::string word(const std::string& key, const std::string& fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    used[key] = true;
    return it->second;
  }

  bool onoff(const std::string& key, bool fallback) {
    const std::string v = word(key, fallback ? "on" : "off");
    if (v == "on") return true;
    if (v == "off") return false;
    util::fail_invalid("config: key '" + key + "' must be on or off, got '" + v + "'");
  }

  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    used[key] = true;
    std::istringstream is(it->second);
    std::vector<double> out;
    double v;
    while (is >> v) out.push_back(v);
    if (out.empty()) util::fail_invalid("config: key '" + key + "' has no numeric values");
    return out;
  }
};

}  // namespace

void RunConfig::validate() const {
  scene.validate();
  if (scene_pool_train < 1 || scene_pool_heldout < 0) {
    util::fail_invalid("config: scene pool sizes invalid");
  }
  if (voxel_channels < 1 || hidden_width < 1 || bev_channels < 1) {
    util::fail_invalid("config: model widths must be positive");
  }
  if (hsa_k < 1 || scene.grid.nz % hsa_k != 0) {
    util::fail_invalid("config: hsa_k = " + std::to_string(hsa_k) + " does not divide Z = " +
                       std::to_string(scene.grid.nz));
  }
  if (bev_channels % hsa_k != 0) {
    util::fail_invalid("config: hsa_k does not divide bev_channels");
  }
  if (scene.grid.nx % 4 != 0 || scene.grid.ny % 4 != 0) {
    util::fail_invalid("config: grid X and Y must be divisible by 4 for the opacity pyramid");
  }
  if (scene.image_height < 11 || scene.image_width < 11) {
    util::fail_invalid("config: images must be at least 11x11 for SSIM");
  }
  if (warmup_steps < 0 || total_steps < 0 || warmup_steps > total_steps) {
    util::fail_invalid("config: need 0 <= warmup_steps <= total_steps");
  }
  if (metrics_every < 1) util::fail_invalid("config: metrics_every must be >= 1");
  if (learning_rate <= 0.0) util::fail_invalid("config: learning_rate must be positive");
  if (fixed_view >= scene.camera_count) {
    util::fail_invalid("config: view index out of range");
  }
  if (scene.camera_count < 2) {
    util::fail_invalid("config: need at least 2 cameras for view-weight blending");
  }
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "seed = " << seed << "\n";
  os << "scene_pool_train = " << scene_pool_train << "\n";
  os << "scene_pool_heldout = " << scene_pool_heldout << "\n";
  os << "box_count_min = " << scene.box_count_min << "\n";
  os << "box_count_max = " << scene.box_count_max << "\n";
  os << "box_size_min = " << fmt(scene.box_size_min) << "\n";
  os << "box_size_max = " << fmt(scene.box_size_max) << "\n";
  os << "place_radius = " << fmt(scene.place_radius) << "\n";
  os << "box_zmin = " << fmt(scene.box_zmin) << "\n";
  os << "box_zmax = " << fmt(scene.box_zmax) << "\n";
  os << "camera_count = " << scene.camera_count << "\n";
  os << "camera_radius = " << fmt(scene.camera_radius) << "\n";
  os << "camera_height = " << fmt(scene.camera_height) << "\n";
  os << "focal = " << fmt(scene.focal) << "\n";
  os << "image_height = " << scene.image_height << "\n";
  os << "image_width = " << scene.image_width << "\n";
  os << "grid_dims = " << scene.grid.nx << " " << scene.grid.ny << " " << scene.grid.nz << "\n";
  os << "grid_voxel_size = " << fmt(scene.grid.voxel_size) << "\n";
  os << "grid_origin = " << fmt(scene.grid.origin.x) << " " << fmt(scene.grid.origin.y) << " "
     << fmt(scene.grid.origin.z) << "\n";
  os << "background = "
     << (scene.background == scene::BackgroundMode::kFlat ? "flat" : "checker") << "\n";
  os << "bg_color = " << fmt(scene.bg_color[0]) << " " << fmt(scene.bg_color[1]) << " "
     << fmt(scene.bg_color[2]) << "\n";
  os << "bg_color2 = " << fmt(scene.bg_color2[0]) << " " << fmt(scene.bg_color2[1]) << " "
     << fmt(scene.bg_color2[2]) << "\n";
  os << "checker_px = " << scene.checker_px << "\n";
  os << "noise_level = " << fmt(scene.noise_level) << "\n";
  os << "raw_channels = " << scene.raw_channels << "\n";
  os << "voxel_channels = " << voxel_channels << "\n";
  os << "hidden_width = " << hidden_width << "\n";
  os << "bev_channels = " << bev_channels << "\n";
  os << "hsa_k = " << hsa_k << "\n";
  os << "lambda_mse = " << fmt(render_weights.mse) << "\n";
  os << "lambda_ssim = " << fmt(render_weights.ssim) << "\n";
  os << "lambda_l1 = " << fmt(render_weights.l1) << "\n";
  os << "lambda_bce = " << fmt(lambda_bce) << "\n";
  os << "lambda_dice = " << fmt(lambda_dice) << "\n";
  os << "learning_rate = " << fmt(learning_rate) << "\n";
  os << "adam_beta1 = " << fmt(adam_beta1) << "\n";
  os << "adam_beta2 = " << fmt(adam_beta2) << "\n";
  os << "adam_eps = " << fmt(adam_eps) << "\n";
  os << "warmup_steps = " << warmup_steps << "\n";
  os << "total_steps = " << total_steps << "\n";
  os << "metrics_every = " << metrics_every << "\n";
  os << "hoa = " << (hoa_enabled ? "on" : "off") << "\n";
  os << "hsa_multiscale = " << (hsa_multiscale ? "on" : "off") << "\n";
  os << "fields = " << field_mode_name(fields) << "\n";
  os << "goal = " << goal_mode_name(goal) << "\n";
  os << "depth_render = " << (depth_render ? "on" : "off") << "\n";
  os << "footprint = " << (disk_footprint ? "disk" : "point") << "\n";
  os << "view = " << (fixed_view < 0 ? std::string("random") : std::to_string(fixed_view))
     << "\n";
  return os.str();
}

uint64_t RunConfig::structural_hash() const {
  std::istringstream is(to_text());
  std::string line;
  uint64_t hash = 1469598103934665603ULL;  // FNV-1a 64
  while (std::getline(is, line)) {
    if (line.rfind("total_steps", 0) == 0) continue;
    for (char c : line) {
      hash ^= static_cast<unsigned char>(c);
      hash *= 1099511628211ULL;
    }
    hash ^= '\n';
    hash *= 1099511628211ULL;
  }
  return hash;
}

RunConfig RunConfig::parse_text(const std::string& text) {
  Parser p;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      util::fail_invalid("config: line " + std::to_string(line_no) + " is not 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      util::fail_invalid("config: line " + std::to_string(line_no) + " is not 'key = value'");
    }
    if (p.kv.count(key)) util::fail_invalid("config: duplicate key '" + key + "'");
    p.kv[key] = value;
  }

  RunConfig cfg;
  cfg.seed = static_cast<uint64_t>(p.integer("seed", static_cast<int64_t>(cfg.seed)));
  cfg.scene_pool_train = static_cast<int>(p.integer("scene_pool_train", cfg.scene_pool_train));
  cfg.scene_pool_heldout =
      static_cast<int>(p.integer("scene_pool_heldout", cfg.scene_pool_heldout));
  cfg.scene.box_count_min = static_cast<int>(p.integer("box_count_min", cfg.scene.box_count_min));
  cfg.scene.box_count_max = static_cast<int>(p.integer("box_count_max", cfg.scene.box_count_max));
  cfg.scene.box_size_min = p.number("box_size_min", cfg.scene.box_size_min);
  cfg.scene.box_size_max = p.number("box_size_max", cfg.scene.box_size_max);
  cfg.scene.place_radius = p.number("place_radius", cfg.scene.place_radius);
  cfg.scene.box_zmin = p.number("box_zmin", cfg.scene.box_zmin);
  cfg.scene.box_zmax = p.number("box_zmax", cfg.scene.box_zmax);
  cfg.scene.camera_count = static_cast<int>(p.integer("camera_count", cfg.scene.camera_count));
  cfg.scene.camera_radius = p.number("camera_radius", cfg.scene.camera_radius);
  cfg.scene.camera_height = p.number("camera_height", cfg.scene.camera_height);
  cfg.scene.focal = p.number("focal", cfg.scene.focal);
  cfg.scene.image_height = static_cast<int>(p.integer("image_height", cfg.scene.image_height));
  cfg.scene.image_width = static_cast<int>(p.integer("image_width", cfg.scene.image_width));
  {
    const std::vector<double> dims = p.numbers(
        "grid_dims", {static_cast<double>(cfg.scene.grid.nx),
                      static_cast<double>(cfg.scene.grid.ny),
                      static_cast<double>(cfg.scene.grid.nz)});
    if (dims.size() != 3) util::fail_invalid("config: grid_dims needs 3 values");
    cfg.scene.grid.nx = static_cast<int>(dims[0]);
    cfg.scene.grid.ny = static_cast<int>(dims[1]);
    cfg.scene.grid.nz = static_cast<int>(dims[2]);
  }
  cfg.scene.grid.voxel_size = p.number("grid_voxel_size", cfg.scene.grid.voxel_size);
  {
    const std::vector<double> origin =
        p.numbers("grid_origin", {cfg.scene.grid.origin.x, cfg.scene.grid.origin.y,
                                  cfg.scene.grid.origin.z});
    if (origin.size() != 3) util::fail_invalid("config: grid_origin needs 3 values");
    cfg.scene.grid.origin = {origin[0], origin[1], origin[2]};
  }
  {
    const std::string bg = p.word("background", "checker");
    if (bg == "flat") {
      cfg.scene.background = scene::BackgroundMode::kFlat;
    } else if (bg == "checker") {
      cfg.scene.background = scene::BackgroundMode::kChecker;
    } else {
      util::fail_invalid("config: background must be flat or checker");
    }
  }
  {
    const std::vector<double> c =
        p.numbers("bg_color", {cfg.scene.bg_color[0], cfg.scene.bg_color[1], cfg.scene.bg_color[2]});
    if (c.size() != 3) util::fail_invalid("config: bg_color needs 3 values");
    cfg.scene.bg_color = {c[0], c[1], c[2]};
  }
  {
    const std::vector<double> c = p.numbers(
        "bg_color2", {cfg.scene.bg_color2[0], cfg.scene.bg_color2[1], cfg.scene.bg_color2[2]});
    if (c.size() != 3) util::fail_invalid("config: bg_color2 needs 3 values");
    cfg.scene.bg_color2 = {c[0], c[1], c[2]};
  }
  cfg.scene.checker_px = static_cast<int>(p.integer("checker_px", cfg.scene.checker_px));
  cfg.scene.noise_level = p.number("noise_level", cfg.scene.noise_level);
  cfg.scene.raw_channels = static_cast<int>(p.integer("raw_channels", cfg.scene.raw_channels));
  cfg.voxel_channels = static_cast<int>(p.integer("voxel_channels", cfg.voxel_channels));
  cfg.hidden_width = static_cast<int>(p.integer("hidden_width", cfg.hidden_width));
  cfg.bev_channels = static_cast<int>(p.integer("bev_channels", cfg.bev_channels));
  cfg.hsa_k = static_cast<int>(p.integer("hsa_k", cfg.hsa_k));
  cfg.render_weights.mse = p.number("lambda_mse", cfg.render_weights.mse);
  cfg.render_weights.ssim = p.number("lambda_ssim", cfg.render_weights.ssim);
  cfg.render_weights.l1 = p.number("lambda_l1", cfg.render_weights.l1);
  cfg.lambda_bce = p.number("lambda_bce", cfg.lambda_bce);
  cfg.lambda_dice = p.number("lambda_dice", cfg.lambda_dice);
  cfg.learning_rate = p.number("learning_rate", cfg.learning_rate);
  cfg.adam_beta1 = p.number("adam_beta1", cfg.adam_beta1);
  cfg.adam_beta2 = p.number("adam_beta2", cfg.adam_beta2);
  cfg.adam_eps = p.number("adam_eps", cfg.adam_eps);
  cfg.warmup_steps = p.integer("warmup_steps", cfg.warmup_steps);
  cfg.total_steps = p.integer("total_steps", cfg.total_steps);
  cfg.metrics_every = p.integer("metrics_every", cfg.metrics_every);
  cfg.hoa_enabled = p.onoff("hoa", cfg.hoa_enabled);
  cfg.hsa_multiscale = p.onoff("hsa_multiscale", cfg.hsa_multiscale);
  {
    const std::string f = p.word("fields", field_mode_name(cfg.fields));
    if (f == "both" || f == "hybrid") {
      cfg.fields = FieldMode::kHybrid;
    } else if (f == "gs") {
      cfg.fields = FieldMode::kGaussian;
    } else if (f == "nerf") {
      cfg.fields = FieldMode::kNerf;
    } else {
      util::fail_invalid("config: fields must be hybrid, gs or nerf");
    }
  }
  {
    const std::string g = p.word("goal", goal_mode_name(cfg.goal));
    if (g == "scene") {
      cfg.goal = GoalMode::kScene;
    } else if (g == "object") {
      cfg.goal = GoalMode::kObject;
    } else if (g == "scene+object") {
      cfg.goal = GoalMode::kSceneObject;
    } else {
      util::fail_invalid("config: goal must be scene, object or scene+object");
    }
  }
  cfg.depth_render = p.onoff("depth_render", cfg.depth_render);
  {
    const std::string f = p.word("footprint", cfg.disk_footprint ? "disk" : "point");
    if (f == "point") {
      cfg.disk_footprint = false;
    } else if (f == "disk") {
      cfg.disk_footprint = true;
    } else {
      util::fail_invalid("config: footprint must be point or disk");
    }
  }
  {
    const std::string v = p.word("view", cfg.fixed_view < 0 ? "random" : std::to_string(cfg.fixed_view));
    if (v == "random") {
      cfg.fixed_view = -1;
    } else {
      try {
        cfg.fixed_view = std::stoi(v);
      } catch (...) {
        util::fail_invalid("config: view must be 'random' or an index");
      }
      if (cfg.fixed_view < 0) util::fail_invalid("config: view index must be >= 0");
    }
  }

  for (const auto& [key, value] : p.kv) {
    (void)value;
    if (!p.used.count(key)) util::fail_invalid("config: unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) util::fail_invalid("config: cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_text(buffer.str());
}

std::string field_mode_name(FieldMode mode) {
  switch (mode) {
    case FieldMode::kHybrid: return "hybrid";
    case FieldMode::kGaussian: return "gs";
    case FieldMode::kNerf: return "nerf";
  }
  return "hybrid";
}

std::string goal_mode_name(GoalMode mode) {
  switch (mode) {
    case GoalMode::kScene: return "scene";
    case GoalMode::kObject: return "object";
    case GoalMode::kSceneObject: return "scene+object";
  }
  return "scene+object";
}

}  // namespace ocrf::pipeline
