// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <vector>

#include "ocrf/render/render.hpp"
#include "ocrf/util/check.hpp"

namespace ocrf::render {

namespace {

// Per-pixel record needed to replay the shading in backward.
struct PixelSample {
  int64_t pixel;
  int64_t voxel;
  double dist;                       // camera-to-center Euclidean distance
  std::vector<int> valid_views;      // views that see the center
  std::vector<std::array<double, 3>> colors;  // bilinear samples per valid view
};

}  // namespace

RenderOutput volume_render(const fields::NerfAttributes& nerf, const geom::Camera& cam,
                           const SourceViews& views, const geom::VoxelGridSpec& spec,
                           const VolumeOptions& opts, VolumeStats* stats) {
  if (!views.images || !views.cameras || views.images->size() != views.cameras->size()) {
    util::fail_invalid("volume_render: source views and cameras must align");
  }
  const int n_views = static_cast<int>(views.images->size());
  if (nerf.weight_logits.dim(1) != n_views) {
    util::fail_invalid("volume_render: weight logits " +
                       util::shape_str(nerf.weight_logits.shape()) + " do not cover " +
                       std::to_string(n_views) + " views");
  }
  const int h = cam.height, w = cam.width;
  RenderOutput out;
  out.image = diff::Tensor({h, w, 3});
  out.depth = diff::Tensor({h, w});

  const double* ov = nerf.opacity.data();
  const double* wl = nerf.weight_logits.data();
  double* img = out.image.data();
  double* dep = out.depth.data();

  const geom::Vec3 cam_pos = cam.position();
  const double step = 0.5 * spec.voxel_size;
  const geom::Vec3 lo = spec.origin;
  const geom::Vec3 hi = spec.max_corner();

  std::vector<PixelSample> samples;
  VolumeStats local_stats;

  for (int py = 0; py < h; ++py) {
    for (int px = 0; px < w; ++px) {
      const int64_t pixel = static_cast<int64_t>(py) * w + px;
      const geom::Ray ray = geom::ray_through_pixel(px, py, cam);

      // Ray/grid AABB overlap via slabs.
      double t0 = 1e-6, t1 = std::numeric_limits<double>::infinity();
      const double o3[3] = {ray.origin.x, ray.origin.y, ray.origin.z};
      const double d3[3] = {ray.dir.x, ray.dir.y, ray.dir.z};
      const double lo3[3] = {lo.x, lo.y, lo.z};
      const double hi3[3] = {hi.x, hi.y, hi.z};
      bool miss = false;
      for (int a = 0; a < 3 && !miss; ++a) {
        if (std::fabs(d3[a]) < 1e-15) {
          if (o3[a] < lo3[a] || o3[a] >= hi3[a]) miss = true;
          continue;
        }
        double ta = (lo3[a] - o3[a]) / d3[a];
        double tb = (hi3[a] - o3[a]) / d3[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) miss = true;
      }

      int64_t best_voxel = -1;
      double best_o = -1.0;
      if (!miss) {
        for (double t = t0 + 0.5 * step; t < t1; t += step) {
          const geom::Vec3 p = ray.origin + ray.dir * t;
          const int i = static_cast<int>(std::floor((p.x - lo.x) / spec.voxel_size));
          const int j = static_cast<int>(std::floor((p.y - lo.y) / spec.voxel_size));
          const int k = static_cast<int>(std::floor((p.z - lo.z) / spec.voxel_size));
          if (i < 0 || i >= spec.nx || j < 0 || j >= spec.ny || k < 0 || k >= spec.nz) continue;
          const int64_t voxel = spec.flat(i, j, k);
          if (ov[voxel] > best_o) {  // strict: nearest sample wins ties
            best_o = ov[voxel];
            best_voxel = voxel;
          }
        }
      }

      if (best_voxel < 0 || best_o < opts.opacity_threshold) {
        for (int ch = 0; ch < 3; ++ch) {
          img[pixel * 3 + ch] = opts.background[static_cast<std::size_t>(ch)];
        }
        dep[pixel] = 0.0;
        ++local_stats.background_pixels;
        continue;
      }

      const int vi = static_cast<int>(best_voxel / (spec.ny * spec.nz));
      const int vj = static_cast<int>((best_voxel / spec.nz) % spec.ny);
      const int vk = static_cast<int>(best_voxel % spec.nz);
      const geom::Vec3 center = spec.center(vi, vj, vk);
      const double dist = (center - cam_pos).norm();

      PixelSample rec;
      rec.pixel = pixel;
      rec.voxel = best_voxel;
      rec.dist = dist;
      for (int v = 0; v < n_views; ++v) {
        const geom::Projection pr = geom::project(center, (*views.cameras)[static_cast<std::size_t>(v)]);
        if (pr.behind) continue;
        const auto& src = (*views.images)[static_cast<std::size_t>(v)];
        if (pr.u < 0.0 || pr.u >= src.width || pr.v < 0.0 || pr.v >= src.height) continue;
        rec.valid_views.push_back(v);
        rec.colors.push_back(scene::bilinear_sample(src, pr.u, pr.v));
      }

      double color[3];
      if (rec.valid_views.empty()) {
        color[0] = color[1] = color[2] = 0.5;  // invisible-everywhere fallback
        ++local_stats.gray_fallback_pixels;
      } else {
        // Softmax over the views that actually see the point keeps the color
        // a convex combination of sampled view colors.
        const std::size_t m = rec.valid_views.size();
        double mx = -std::numeric_limits<double>::infinity();
        for (int v : rec.valid_views) mx = std::max(mx, wl[best_voxel * n_views + v]);
        double denom = 0.0;
        std::vector<double> e(m);
        for (std::size_t q = 0; q < m; ++q) {
          e[q] = std::exp(wl[best_voxel * n_views + rec.valid_views[q]] - mx);
          denom += e[q];
        }
        color[0] = color[1] = color[2] = 0.0;
        for (std::size_t q = 0; q < m; ++q) {
          const double s = e[q] / denom;
          for (int ch = 0; ch < 3; ++ch) color[ch] += s * rec.colors[q][static_cast<std::size_t>(ch)];
        }
      }
      const double o = best_o;
      for (int ch = 0; ch < 3; ++ch) {
        img[pixel * 3 + ch] =
            o * color[ch] + (1.0 - o) * opts.background[static_cast<std::size_t>(ch)];
      }
      dep[pixel] = o * dist;
      samples.push_back(std::move(rec));
    }
  }
  if (stats) *stats = local_stats;

  diff::Tape* tape = diff::active_tape();
  const bool track = tape && (nerf.opacity.has_grad() || nerf.weight_logits.has_grad());
  if (track) {
    out.image.ensure_grad();
    out.depth.ensure_grad();
    tape->register_grad(out.image.grad_buffer());
    tape->register_grad(out.depth.grad_buffer());
    if (nerf.opacity.has_grad()) tape->register_grad(nerf.opacity.grad_buffer());
    if (nerf.weight_logits.has_grad()) tape->register_grad(nerf.weight_logits.grad_buffer());
    diff::Tensor oc = nerf.opacity, wc = nerf.weight_logits, img_t = out.image,
                 dep_t = out.depth;
    auto bg = opts.background;
    tape->record([oc, wc, img_t, dep_t, bg, n_views, samples = std::move(samples)]() mutable {
      const double* o = oc.data();
      const double* wv = wc.data();
      double* go = oc.has_grad() ? oc.grad() : nullptr;
      double* gw = wc.has_grad() ? wc.grad() : nullptr;
      const double* gimg = img_t.grad();
      const double* gdep = dep_t.grad();
      for (const PixelSample& rec : samples) {
        const double* gi = gimg + rec.pixel * 3;
        const double gd = gdep[rec.pixel];
        const double oi = o[rec.voxel];
        double color[3] = {0.5, 0.5, 0.5};
        std::vector<double> soft;
        if (!rec.valid_views.empty()) {
          const std::size_t m = rec.valid_views.size();
          double mx = -std::numeric_limits<double>::infinity();
          for (int v : rec.valid_views) mx = std::max(mx, wv[rec.voxel * n_views + v]);
          double denom = 0.0;
          soft.resize(m);
          for (std::size_t q = 0; q < m; ++q) {
            soft[q] = std::exp(wv[rec.voxel * n_views + rec.valid_views[q]] - mx);
            denom += soft[q];
          }
          color[0] = color[1] = color[2] = 0.0;
          for (std::size_t q = 0; q < m; ++q) {
            soft[q] /= denom;
            for (int ch = 0; ch < 3; ++ch) {
              color[ch] += soft[q] * rec.colors[q][static_cast<std::size_t>(ch)];
            }
          }
        }
        if (go) {
          double acc = gd * rec.dist;
          for (int ch = 0; ch < 3; ++ch) {
            acc += gi[ch] * (color[ch] - bg[static_cast<std::size_t>(ch)]);
          }
          go[rec.voxel] += acc;
        }
        if (gw && !rec.valid_views.empty()) {
          const std::size_t m = rec.valid_views.size();
          std::vector<double> gs(m, 0.0);
          for (std::size_t q = 0; q < m; ++q) {
            for (int ch = 0; ch < 3; ++ch) {
              gs[q] += gi[ch] * oi * rec.colors[q][static_cast<std::size_t>(ch)];
            }
          }
          double dot = 0.0;
          for (std::size_t q = 0; q < m; ++q) dot += gs[q] * soft[q];
          for (std::size_t q = 0; q < m; ++q) {
            gw[rec.voxel * n_views + rec.valid_views[q]] += soft[q] * (gs[q] - dot);
          }
        }
      }
    });
  }
  return out;
}

FusionParams FusionParams::init(double theta0) {
  FusionParams fp;
  fp.theta = diff::Tensor::scalar(theta0, /*requires_grad=*/true);
  return fp;
}

double FusionParams::alpha_value() const { return 1.0 / (1.0 + std::exp(-theta.item())); }

RenderOutput fuse(const RenderOutput& a, const RenderOutput& b, const FusionParams& fp) {
  if (a.image.shape() != b.image.shape() || a.depth.shape() != b.depth.shape()) {
    util::fail_invalid("fuse: shape mismatch " + util::shape_str(a.image.shape()) + " vs " +
                       util::shape_str(b.image.shape()));
  }
  const diff::Tensor alpha = fp.alpha();
  const diff::Tensor beta = diff::sub(diff::Tensor::scalar(1.0), alpha);
  RenderOutput out;
  out.image = diff::add(diff::scale_by(a.image, alpha), diff::scale_by(b.image, beta));
  out.depth = diff::add(diff::scale_by(a.depth, alpha), diff::scale_by(b.depth, beta));
  return out;
}

}  // namespace ocrf::render
