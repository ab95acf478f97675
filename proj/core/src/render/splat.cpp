// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <vector>

#include "ocrf/render/render.hpp"
#include "ocrf/util/check.hpp"

namespace ocrf::render {

namespace {

struct Contribution {
  int64_t gaussian;
  double depth;
};

}  // namespace

RenderOutput splat_render(const fields::GaussianAttributes& g, const geom::Camera& cam,
                          const SplatOptions& opts) {
  const int64_t n = g.positions.dim(0);
  const int h = cam.height, w = cam.width;
  RenderOutput out;
  out.image = diff::Tensor({h, w, 3});
  out.depth = diff::Tensor({h, w});

  // Per-pixel contributor lists, later sorted front to back.
  std::vector<std::vector<Contribution>> pixels(static_cast<std::size_t>(h) * w);
  const double* pos = g.positions.data();
  const double* sc = g.scale.data();
  for (int64_t i = 0; i < n; ++i) {
    const geom::Vec3 p{pos[i * 3], pos[i * 3 + 1], pos[i * 3 + 2]};
    const geom::Projection pr = geom::project(p, cam);
    if (pr.behind) continue;
    const int px = static_cast<int>(std::floor(pr.u));
    const int py = static_cast<int>(std::floor(pr.v));
    if (!opts.disk_footprint) {
      if (px < 0 || px >= w || py < 0 || py >= h) continue;
      pixels[static_cast<std::size_t>(py) * w + px].push_back({i, pr.depth});
    } else {
      const double mean_s = (sc[i * 3] + sc[i * 3 + 1] + sc[i * 3 + 2]) / 3.0;
      const double radius = std::min(opts.max_radius_px, cam.fx * mean_s / pr.depth);
      const int r = std::max(0, static_cast<int>(std::floor(radius)));
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (static_cast<double>(dx) * dx + static_cast<double>(dy) * dy > radius * radius) {
            continue;
          }
          const int qx = px + dx, qy = py + dy;
          if (qx < 0 || qx >= w || qy < 0 || qy >= h) continue;
          pixels[static_cast<std::size_t>(qy) * w + qx].push_back({i, pr.depth});
        }
      }
    }
  }
  for (auto& list : pixels) {
    std::stable_sort(list.begin(), list.end(), [](const Contribution& a, const Contribution& b) {
      return a.depth < b.depth || (a.depth == b.depth && a.gaussian < b.gaussian);
    });
  }

  const double* ov = g.opacity.data();
  const double* cv = g.color.data();
  double* img = out.image.data();
  double* dep = out.depth.data();
  for (int64_t pix = 0; pix < static_cast<int64_t>(pixels.size()); ++pix) {
    double t = 1.0;
    double acc[3] = {0.0, 0.0, 0.0};
    double dacc = 0.0;
    for (const Contribution& c : pixels[static_cast<std::size_t>(pix)]) {
      const double o = ov[c.gaussian];
      const double weight = o * t;
      for (int ch = 0; ch < 3; ++ch) acc[ch] += cv[c.gaussian * 3 + ch] * weight;
      dacc += c.depth * weight;
      t *= (1.0 - o);
    }
    for (int ch = 0; ch < 3; ++ch) {
      img[pix * 3 + ch] = acc[ch] + opts.background[static_cast<std::size_t>(ch)] * t;
    }
    dep[pix] = dacc;
  }

  diff::Tape* tape = diff::active_tape();
  const bool track = tape && (g.opacity.has_grad() || g.color.has_grad());
  if (track) {
    out.image.ensure_grad();
    out.depth.ensure_grad();
    tape->register_grad(out.image.grad_buffer());
    tape->register_grad(out.depth.grad_buffer());
    if (g.opacity.has_grad()) tape->register_grad(g.opacity.grad_buffer());
    if (g.color.has_grad()) tape->register_grad(g.color.grad_buffer());
    diff::Tensor oc = g.opacity, cc = g.color, img_t = out.image, dep_t = out.depth;
    auto bg = opts.background;
    tape->record([oc, cc, img_t, dep_t, bg, pixels = std::move(pixels)]() mutable {
      const double* o = oc.data();
      const double* c = cc.data();
      double* go = oc.has_grad() ? oc.grad() : nullptr;
      double* gc = cc.has_grad() ? cc.grad() : nullptr;
      const double* gimg = img_t.grad();
      const double* gdep = dep_t.grad();
      std::vector<double> trans;
      for (int64_t pix = 0; pix < static_cast<int64_t>(pixels.size()); ++pix) {
        const auto& list = pixels[static_cast<std::size_t>(pix)];
        if (list.empty()) continue;
        const std::size_t m = list.size();
        trans.assign(m, 1.0);
        for (std::size_t i = 1; i < m; ++i) {
          trans[i] = trans[i - 1] * (1.0 - o[list[i - 1].gaussian]);
        }
        const double* gi = gimg + pix * 3;
        const double gd = gdep[pix];
        // Suffix accumulators expressed without dividing by (1 - o_i):
        //   A[ch] = sum_{k>i} c_k o_k prod_{i<j<k}(1-o_j)   (+ bg tail B)
        //   dImg/do_i = T_i (c_i - A - B),  dDep/do_i = T_i (z_i - Az).
        double a_col[3] = {bg[0], bg[1], bg[2]};
        double a_dep = 0.0;
        for (std::size_t ri = m; ri-- > 0;) {
          const int64_t gi_idx = list[ri].gaussian;
          const double oi = o[gi_idx];
          const double ti = trans[ri];
          if (gc) {
            for (int ch = 0; ch < 3; ++ch) gc[gi_idx * 3 + ch] += gi[ch] * oi * ti;
          }
          if (go) {
            double dot = 0.0;
            for (int ch = 0; ch < 3; ++ch) dot += gi[ch] * (c[gi_idx * 3 + ch] - a_col[ch]);
            dot += gd * (list[ri].depth - a_dep);
            go[gi_idx] += ti * dot;
          }
          for (int ch = 0; ch < 3; ++ch) {
            a_col[ch] = a_col[ch] * (1.0 - oi) + c[gi_idx * 3 + ch] * oi;
          }
          a_dep = a_dep * (1.0 - oi) + list[ri].depth * oi;
        }
      }
    });
  }
  return out;
}

}  // namespace ocrf::render
