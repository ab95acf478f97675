// SPDX-License-Identifier: Apache-2.0
#include "ocrf/pipeline/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>

#include "ocrf/diff/gradcheck.hpp"
#include "ocrf/diff/ops.hpp"
#include "ocrf/fields/decoder.hpp"
#include "ocrf/hoa/hoa.hpp"
#include "ocrf/render/losses.hpp"
#include "ocrf/render/render.hpp"
#include "ocrf/util/rng.hpp"

namespace ocrf::pipeline {

namespace {

using diff::Tensor;

Tensor random_tensor(diff::Shape shape, util::Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  double* p = t.data();
  for (int64_t i = 0; i < t.numel(); ++i) p[i] = rng.uniform(lo, hi);
  return t;
}

// Fixed random projection to a scalar so multi-output ops can be checked.
Tensor to_scalar(const Tensor& t, uint64_t seed) {
  util::Rng rng(util::Rng::mix(seed, 0xabcd));
  const Tensor w = random_tensor(t.shape(), rng);
  return diff::sum_all(diff::mul(t, w));
}

using Builder = std::function<Tensor(const std::vector<Tensor>&, uint64_t seed)>;

double check(const Builder& fn, std::vector<Tensor> probes, uint64_t seed) {
  return diff::gradcheck(
      [fn, seed](const std::vector<Tensor>& inputs) { return fn(inputs, seed); },
      std::move(probes));
}

geom::Camera test_camera(int width, int height, double angle) {
  const geom::Vec3 pos{4.0 * std::cos(angle), 4.0 * std::sin(angle), 1.5};
  return geom::Camera::look_at(pos, {0, 0, 0}, 0.9 * width, 0.9 * width, 0.5 * width,
                               0.5 * height, width, height);
}

// Opacities spaced at least 2e-2 apart keep every per-ray argmax stable under
// the 1e-6 probe steps.
Tensor spaced_opacities(int64_t n, util::Rng& rng) {
  std::vector<double> levels(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < levels.size(); ++i) {
    levels[i] = 0.10 + 0.8 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  }
  for (std::size_t i = levels.size(); i > 1; --i) {
    std::swap(levels[i - 1], levels[static_cast<std::size_t>(rng.uniform_int(
                                 static_cast<int64_t>(i)))]);
  }
  return Tensor::from_values({n, 1}, std::move(levels));
}

}  // namespace

std::vector<GradCheckCase> gradcheck_suite() {
  std::vector<GradCheckCase> cases;
  auto add_case = [&](const std::string& name, std::function<double(uint64_t)> run) {
    cases.push_back({name, std::move(run)});
  };

  // ---- diffcore elementwise ----
  auto binary_case = [&](const std::string& name, Tensor (*op)(const Tensor&, const Tensor&),
                         double lo, double hi) {
    add_case("diffcore." + name, [op, lo, hi](uint64_t seed) {
      util::Rng rng(seed);
      const Tensor a = random_tensor({3, 4}, rng, lo, hi);
      const Tensor b = random_tensor({3, 4}, rng, lo, hi);
      return check(
          [op](const std::vector<Tensor>& in, uint64_t s) {
            return to_scalar(op(in[0], in[1]), s);
          },
          {a, b}, seed);
    });
  };
  binary_case("add", diff::add, -1.0, 1.0);
  binary_case("sub", diff::sub, -1.0, 1.0);
  binary_case("mul", diff::mul, -1.0, 1.0);
  binary_case("divide", diff::divide, 0.5, 2.0);

  auto unary_case = [&](const std::string& name, Tensor (*op)(const Tensor&), double lo,
                        double hi) {
    add_case("diffcore." + name, [op, lo, hi](uint64_t seed) {
      util::Rng rng(seed);
      const Tensor a = random_tensor({4, 5}, rng, lo, hi);
      return check(
          [op](const std::vector<Tensor>& in, uint64_t s) { return to_scalar(op(in[0]), s); },
          {a}, seed);
    });
  };
  unary_case("sigmoid", diff::sigmoid, -3.0, 3.0);
  unary_case("softplus", diff::softplus, -3.0, 3.0);
  unary_case("exp", diff::exp, -2.0, 2.0);
  unary_case("log", diff::log, 0.2, 3.0);
  unary_case("square", diff::square, -2.0, 2.0);

  add_case("diffcore.absval", [](uint64_t seed) {
    util::Rng rng(seed);
    // Keep probes away from the kink at 0.
    Tensor a = random_tensor({4, 5}, rng, 0.2, 1.5);
    double* p = a.data();
    for (int64_t i = 0; i < a.numel(); ++i) {
      if (rng.uniform() < 0.5) p[i] = -p[i];
    }
    return check(
        [](const std::vector<Tensor>& in, uint64_t s) {
          return to_scalar(diff::absval(in[0]), s);
        },
        {a}, seed);
  });
  add_case("diffcore.clamp", [](uint64_t seed) {
    util::Rng rng(seed);
    const Tensor a = random_tensor({4, 5}, rng, -2.0, 2.0);
    return check(
        [](const std::vector<Tensor>& in, uint64_t s) {
          return to_scalar(diff::clamp(in[0], -0.75001, 0.75001), s);
        },
        {a}, seed);
  });
  add_case("diffcore.scale", [](uint64_t seed) {
    util::Rng rng(seed);
    const Tensor a = random_tensor({3, 4}, rng);
    return check(
        [](const std::vector<Tensor>& in, uint64_t s) {
          return to_scalar(diff::scale(in[0], -1.7), s);
        },
        {a}, seed);
  });
  add_case("diffcore.add_scalar", [](uint64_t seed) {
    util::Rng rng(seed);
    const Tensor a = random_tensor({3, 4}, rng);
    return check(
        [](const std::vector<Tensor>& in, uint64_t s) {
          return to_scalar(diff::add_scalar(in[0], 0.37), s);
        },
        {a}, seed);
  });
  add_case("diffcore.scale_by", [](uint64_t seed) {
    util::Rng rng(seed);
    const Tensor a = random_tensor({3, 4}, rng);
    const Tensor s = random_tensor({1}, rng, 0.5, 1.5);
    return check(
        [](const std::vector<Tensor>& in, uint64_t sd) {
          return to_scalar(diff::scale_by(in[0], in[1]), sd);
        },
        {a, s}, seed);
  });
  add_case("diffcore.add_scalar_t", [](uint64_t seed) {
    util::Rng rng(seed);
    const Tensor a = random_tensor({3, 4}, rng);
    const Tensor s = random_tensor({1}, rng);
    return check(
        [](const std::vector<Tensor>& in, uint64_t sd) {
          return to_scalar(diff::add_scalar_t(in[0], in[1]), sd);
        },
        {a, s}, seed);
  });

  // ---- matmul / affine ----
  add_case("diffcore.matmul", [](uint64_t seed) {
    util::Rng rng(seed);
    const Tensor a = random_tensor({3, 4}, rng);
    const Tensor b = random_tensor({4, 5}, rng);
    return check(
        [](const std::vector<Tensor>& in, uint64_t s) {
          return to_scalar(diff::matmul(in[0], in[1]), s);
        },
        {a, b}, seed);
  });
  add_case("diffcore.linear", [](uint64_t seed) {
    util::Rng rng(seed);
    const Tensor x = random_tensor({5, 4}, rng);
    const Tensor w = random_tensor({4, 3}, rng);
    const Tensor b = random_tensor({3}, rng);
    return check(
        [](const std::vector<Tensor>& in, uint64_t s) {
          return to_scalar(diff::linear(in[0], in[1], in[2]), s);
        },
        {x, w, b}, seed);
  });

  // ---- convolutions ----
  auto conv_case = [&](const std::string& name, int kernel, int stride) {
    add_case("diffcore." + name, [kernel, stride](uint64_t seed) {
      util::Rng rng(seed);
      const Tensor x = random_tensor({2, 6, 6}, rng);
      const Tensor w = random_tensor({3, 2, kernel, kernel}, rng);
      const Tensor b = random_tensor({3}, rng);
      const int pad = kernel / 2;
      return check(
          [stride, pad](const std::vector<Tensor>& in, uint64_t s) {
            return to_scalar(diff::conv2d(in[0], in[1], &in[2], stride, pad), s);
          },
          {x, w, b}, seed);
    });
  };
  conv_case("conv2d_1x1", 1, 1);
  conv_case("conv2d_3x3_s1", 3, 1);
  conv_case("conv2d_3x3_s2", 3, 2);

  add_case("diffcore.conv_transpose2d", [](uint64_t seed) {
    util::Rng rng(seed);
    const Tensor x = random_tensor({2, 4, 4}, rng);
    const Tensor w = random_tensor({2, 3, 3, 3}, rng);
    const Tensor b = random_tensor({3}, rng);
    return check(
        [](const std::vector<Tensor>& in, uint64_t s) {
          return to_scalar(diff::conv_transpose2d(in[0], in[1], &in[2], 2, 1, 1), s);
        },
        {x, w, b}, seed);
  });

  // ---- shape / reduction ----
  add_case("diffcore.reduce_max_axis", [](uint64_t seed) {
    util::Rng rng(seed);
    const Tensor x = random_tensor({4, 5, 3}, rng);
    return check(
        [](const std::vector<Tensor>& in, uint64_t s) {
          return to_scalar(diff::reduce_max_axis(in[0], 1), s);
        },
        {x}, seed);
  });
  add_case("diffcore.slice_concat", [](uint64_t seed) {
    util::Rng rng(seed);
    const Tensor x = random_tensor({4, 6}, rng);
    return check(
        [](const std::vector<Tensor>& in, uint64_t s) {
          const Tensor left = diff::slice(in[0], 1, 0, 2);
          const Tensor right = diff::slice(in[0], 1, 2, 4);
          return to_scalar(diff::concat({right, left}, 1), s);
        },
        {x}, seed);
  });
  add_case("diffcore.sum_mean", [](uint64_t seed) {
    util::Rng rng(seed);
    const Tensor x = random_tensor({4, 6}, rng);
    return check(
        [](const std::vector<Tensor>& in, uint64_t) {
          return diff::add(diff::sum_all(diff::square(in[0])), diff::mean_all(in[0]));
        },
        {x}, seed);
  });
  add_case("diffcore.sum_axis", [](uint64_t seed) {
    util::Rng rng(seed);
    const Tensor x = random_tensor({3, 4, 5}, rng);
    return check(
        [](const std::vector<Tensor>& in, uint64_t s) {
          return to_scalar(diff::sum_axis(in[0], 2), s);
        },
        {x}, seed);
  });
  add_case("diffcore.permute_reshape", [](uint64_t seed) {
    util::Rng rng(seed);
    const Tensor x = random_tensor({3, 4, 5}, rng);
    return check(
        [](const std::vector<Tensor>& in, uint64_t s) {
          const Tensor p = diff::permute(in[0], {2, 0, 1});
          return to_scalar(diff::reshape(p, {5, 12}), s);
        },
        {x}, seed);
  });
  add_case("diffcore.softmax", [](uint64_t seed) {
    util::Rng rng(seed);
    const Tensor x = random_tensor({4, 6}, rng, -2.0, 2.0);
    return check(
        [](const std::vector<Tensor>& in, uint64_t s) {
          return to_scalar(diff::softmax(in[0], 1), s);
        },
        {x}, seed);
  });
  add_case("diffcore.l2_normalize", [](uint64_t seed) {
    util::Rng rng(seed);
    const Tensor x = random_tensor({5, 4}, rng, 0.3, 1.5);
    return check(
        [](const std::vector<Tensor>& in, uint64_t s) {
          return to_scalar(diff::l2_normalize(in[0], 1), s);
        },
        {x}, seed);
  });

  // ---- decoders ----
  add_case("decoder.gaussian_heads", [](uint64_t seed) {
    util::Rng rng(seed);
    geom::VoxelGridSpec spec{{-1.0, -1.0, -0.5}, 0.5, 2, 2, 2};
    fields::DecoderParams params = fields::DecoderParams::init(4, 5, 2, rng);
    const Tensor fv = random_tensor({4, 2, 2, 2}, rng);
    return check(
        [params, spec](const std::vector<Tensor>& in, uint64_t s) {
          const auto attrs = fields::decode_gaussians(in[0], params, spec);
          Tensor acc = to_scalar(attrs.scale, s);
          acc = diff::add(acc, to_scalar(attrs.rotation, s + 1));
          acc = diff::add(acc, to_scalar(attrs.opacity, s + 2));
          return diff::add(acc, to_scalar(attrs.color, s + 3));
        },
        {fv}, seed);
  });
  add_case("decoder.gaussian_params", [](uint64_t seed) {
    util::Rng rng(seed);
    geom::VoxelGridSpec spec{{-1.0, -1.0, -0.5}, 0.5, 2, 2, 2};
    const fields::DecoderParams base = fields::DecoderParams::init(4, 5, 2, rng);
    const Tensor fv = random_tensor({4, 2, 2, 2}, rng);
    return check(
        [base, fv, spec](const std::vector<Tensor>& in, uint64_t s) {
          fields::DecoderParams params = base;
          params.opacity.w1 = in[0];
          params.opacity.b1 = in[1];
          params.opacity.w2 = in[2];
          params.opacity.b2 = in[3];
          const auto attrs = fields::decode_gaussians(fv, params, spec);
          return to_scalar(attrs.opacity, s);
        },
        {base.opacity.w1.detach(), base.opacity.b1.detach(), base.opacity.w2.detach(),
         base.opacity.b2.detach()},
        seed);
  });
  add_case("decoder.nerf_heads", [](uint64_t seed) {
    util::Rng rng(seed);
    fields::DecoderParams params = fields::DecoderParams::init(4, 5, 3, rng);
    const Tensor fv = random_tensor({4, 2, 2, 2}, rng);
    return check(
        [params](const std::vector<Tensor>& in, uint64_t s) {
          const auto attrs = fields::decode_nerf(in[0], params);
          Tensor acc = to_scalar(attrs.opacity, s);
          return diff::add(acc, to_scalar(attrs.weight_logits, s + 1));
        },
        {fv}, seed);
  });

  // ---- renderers ----
  add_case("render.splat", [](uint64_t seed) {
    util::Rng rng(seed);
    const int64_t n = 14;
    const geom::Camera cam = test_camera(6, 6, 0.3);
    Tensor positions({n, 3});
    for (int64_t i = 0; i < n; ++i) {
      positions.at(i, 0) = rng.uniform(-1.2, 1.2);
      positions.at(i, 1) = rng.uniform(-1.2, 1.2);
      positions.at(i, 2) = rng.uniform(-0.5, 0.8);
    }
    const Tensor opacity = spaced_opacities(n, rng);
    const Tensor color = random_tensor({n, 3}, rng, 0.1, 0.9);
    const Tensor scale(diff::Shape{n, 3}, 0.1);
    const Tensor rotation(diff::Shape{n, 4}, 0.5);
    return check(
        [positions, scale, rotation, cam](const std::vector<Tensor>& in, uint64_t s) {
          fields::GaussianAttributes attrs;
          attrs.positions = positions;
          attrs.scale = scale;
          attrs.rotation = rotation;
          attrs.opacity = in[0];
          attrs.color = in[1];
          const render::RenderOutput out = render::splat_render(attrs, cam);
          return diff::add(to_scalar(out.image, s), to_scalar(out.depth, s + 1));
        },
        {opacity, color}, seed);
  });
  add_case("render.volume", [](uint64_t seed) {
    util::Rng rng(seed);
    const geom::VoxelGridSpec spec{{-1.0, -1.0, -0.5}, 0.5, 3, 3, 2};
    const int views = 3;
    std::vector<geom::Camera> cams;
    std::vector<scene::Image> imgs;
    for (int v = 0; v < views; ++v) {
      cams.push_back(test_camera(8, 8, 2.1 * v));
      scene::Image img(8, 8);
      for (double& c : img.rgb) c = rng.uniform(0.1, 0.9);
      imgs.push_back(std::move(img));
    }
    const int64_t n = spec.count();
    // Evenly spaced then shuffled densities keep every per-ray argmax stable
    // under the finite-difference steps.
    Tensor density({n, 1});
    for (int64_t i = 0; i < n; ++i) density.at(i, 0) = 0.15 + 0.09 * static_cast<double>(i);
    for (int64_t i = n; i > 1; --i) {
      std::swap(*(density.data() + (i - 1)), *(density.data() + rng.uniform_int(i)));
    }
    const Tensor logits = random_tensor({n, views}, rng, -1.0, 1.0);
    return check(
        [spec, cams, imgs](const std::vector<Tensor>& in, uint64_t s) {
          fields::NerfAttributes attrs;
          attrs.density = in[0];
          attrs.weight_logits = in[1];
          const Tensor ones(in[0].shape(), 1.0);
          attrs.opacity = diff::sub(ones, diff::exp(diff::scale(in[0], -1.0)));
          render::SourceViews views_{&imgs, &cams};
          const render::RenderOutput out =
              render::volume_render(attrs, cams[0], views_, spec);
          return diff::add(to_scalar(out.image, s), to_scalar(out.depth, s + 1));
        },
        {density, logits}, seed);
  });
  add_case("render.fuse", [](uint64_t seed) {
    util::Rng rng(seed);
    const Tensor img_a = random_tensor({5, 5, 3}, rng, 0.0, 1.0);
    const Tensor img_b = random_tensor({5, 5, 3}, rng, 0.0, 1.0);
    const Tensor dep_a = random_tensor({5, 5}, rng, 0.0, 4.0);
    const Tensor dep_b = random_tensor({5, 5}, rng, 0.0, 4.0);
    const Tensor theta = random_tensor({1}, rng, -1.0, 1.0);
    return check(
        [img_a, img_b, dep_a, dep_b](const std::vector<Tensor>& in, uint64_t s) {
          render::FusionParams fp;
          fp.theta = in[0];
          render::RenderOutput a{img_a, dep_a}, b{img_b, dep_b};
          const render::RenderOutput fused = render::fuse(a, b, fp);
          return diff::add(to_scalar(fused.image, s), to_scalar(fused.depth, s + 1));
        },
        {theta}, seed);
  });

  // ---- rendering losses ----
  add_case("loss.masked_mse", [](uint64_t seed) {
    util::Rng rng(seed);
    const Tensor pred = random_tensor({12, 12, 3}, rng, 0.0, 1.0);
    const Tensor gt = random_tensor({12, 12, 3}, rng, 0.0, 1.0);
    Tensor mask({12, 12, 3});
    for (int64_t i = 0; i < mask.numel(); ++i) mask.data()[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
    return check(
        [gt, mask](const std::vector<Tensor>& in, uint64_t) {
          return render::masked_mse({in[0]}, gt, mask);
        },
        {pred}, seed);
  });
  add_case("loss.masked_ssim", [](uint64_t seed) {
    util::Rng rng(seed);
    const Tensor pred = random_tensor({16, 16, 3}, rng, 0.1, 0.9);
    const Tensor gt = random_tensor({16, 16, 3}, rng, 0.1, 0.9);
    Tensor mask({16, 16, 3});
    // Block mask keeps some windows mixed.
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) {
        const double v = (x < 9) ? 1.0 : 0.0;
        for (int c = 0; c < 3; ++c) mask.at(y, x, c) = v;
      }
    }
    return check(
        [gt, mask](const std::vector<Tensor>& in, uint64_t) {
          return render::masked_ssim({in[0]}, gt, mask);
        },
        {pred}, seed);
  });
  add_case("loss.masked_l1_depth", [](uint64_t seed) {
    util::Rng rng(seed);
    const Tensor pred = random_tensor({10, 10}, rng, 2.0, 4.0);
    // Offset keeps |pred - gt| away from the kink at 0.
    const Tensor gt = random_tensor({10, 10}, rng, 0.5, 1.5);
    Tensor mask({10, 10});
    for (int64_t i = 0; i < mask.numel(); ++i) mask.data()[i] = rng.uniform() < 0.6 ? 1.0 : 0.0;
    return check(
        [gt, mask](const std::vector<Tensor>& in, uint64_t) {
          return render::masked_l1_depth({in[0]}, gt, mask, 3.0);
        },
        {pred}, seed);
  });

  // ---- HOA ----
  add_case("hoa.opacity_fusion", [](uint64_t seed) {
    util::Rng rng(seed);
    hoa::HOAParams params = hoa::HOAParams::init(4, 2, 4, 4, rng);
    const Tensor o_gs = random_tensor({2, 2, 4}, rng, 0.1, 0.9);
    const Tensor o_nerf = random_tensor({2, 2, 4}, rng, 0.1, 0.9);
    return check(
        [params](const std::vector<Tensor>& in, uint64_t s) {
          const auto fused = hoa::opacity_fusion(in[0], in[1], 0.3, params);
          return to_scalar(fused.volume, s);
        },
        {o_gs, o_nerf}, seed);
  });
  add_case("hoa.opacity_fusion_params", [](uint64_t seed) {
    util::Rng rng(seed);
    const hoa::HOAParams base = hoa::HOAParams::init(4, 2, 4, 4, rng);
    const Tensor o_gs = random_tensor({2, 2, 4}, rng, 0.1, 0.9);
    const Tensor o_nerf = random_tensor({2, 2, 4}, rng, 0.1, 0.9);
    return check(
        [base, o_gs, o_nerf](const std::vector<Tensor>& in, uint64_t s) {
          hoa::HOAParams params = base;
          params.wq = in[0];
          params.wk = in[1];
          params.wv = in[2];
          params.wo = in[3];
          const auto fused = hoa::opacity_fusion(o_gs, o_nerf, 0.7, params);
          return to_scalar(fused.volume, s);
        },
        {base.wq.detach(), base.wk.detach(), base.wv.detach(), base.wo.detach()}, seed);
  });
  add_case("hoa.multiscale_hsa", [](uint64_t seed) {
    util::Rng rng(seed);
    hoa::HOAParams params = hoa::HOAParams::init(4, 2, 4, 4, rng);
    const Tensor o_f = random_tensor({4, 4, 4}, rng, 0.05, 0.95);
    return check(
        [params](const std::vector<Tensor>& in, uint64_t s) {
          return to_scalar(hoa::multiscale_hsa(in[0], 2, params), s);
        },
        {o_f}, seed);
  });
  add_case("hoa.apply_attention", [](uint64_t seed) {
    util::Rng rng(seed);
    const Tensor bev = random_tensor({4, 3, 3}, rng);
    const Tensor maps = random_tensor({2, 3, 3}, rng, 0.1, 0.9);
    return check(
        [](const std::vector<Tensor>& in, uint64_t s) {
          return to_scalar(hoa::apply_attention(in[0], in[1]), s);
        },
        {bev, maps}, seed);
  });
  add_case("hoa.bev_mask_head", [](uint64_t seed) {
    util::Rng rng(seed);
    hoa::HOAParams base = hoa::HOAParams::init(4, 2, 4, 4, rng);
    const Tensor fv = random_tensor({4, 4, 4, 4}, rng);
    return check(
        [base](const std::vector<Tensor>& in, uint64_t s) {
          hoa::HOAParams params = base;
          params.bev_w = in[1];
          params.mask_w = in[2];
          const Tensor bev = hoa::bev_from_voxels(in[0], params);
          return to_scalar(hoa::bev_mask_head(bev, params), s);
        },
        {fv, base.bev_w.detach(), base.mask_w.detach()}, seed);
  });
  add_case("hoa.mask_loss", [](uint64_t seed) {
    util::Rng rng(seed);
    const Tensor pred = random_tensor({5, 5}, rng, 0.1, 0.9);
    geom::MaskBEV gt(5, 5);
    for (auto& v : gt.values) v = rng.uniform() < 0.4 ? 1 : 0;
    return check(
        [gt](const std::vector<Tensor>& in, uint64_t) {
          return hoa::mask_loss(in[0], gt, 10.0, 10.0).total;
        },
        {pred}, seed);
  });

  return cases;
}

std::vector<GradCheckReport> run_gradcheck_suite(int seeds_per_case) {
  std::vector<GradCheckReport> reports;
  for (const GradCheckCase& c : gradcheck_suite()) {
    GradCheckReport report;
    report.name = c.name;
    for (int s = 1; s <= seeds_per_case; ++s) {
      report.max_rel_err = std::max(report.max_rel_err, c.run(static_cast<uint64_t>(s)));
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

}  // namespace ocrf::pipeline
