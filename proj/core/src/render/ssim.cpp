// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <vector>

#include "ocrf/render/losses.hpp"
#include "ocrf/util/check.hpp"

namespace ocrf::render {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

// Normalized 1D Gaussian window as a constant conv kernel.
const diff::Tensor& window_row() {
  static const diff::Tensor kernel = [] {
    std::vector<double> w(kWindow);
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      const double d = i - (kWindow - 1) / 2.0;
      w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
      sum += w[static_cast<std::size_t>(i)];
    }
    for (double& v : w) v /= sum;
    return diff::Tensor::from_values({1, 1, 1, kWindow}, std::move(w));
  }();
  return kernel;
}

const diff::Tensor& window_col() {
  static const diff::Tensor kernel = [] {
    diff::Tensor row = window_row();
    return diff::Tensor::from_values({1, 1, kWindow, 1}, row.values());
  }();
  return kernel;
}

// Separable valid-mode Gaussian filtering of an (H,W) plane.
diff::Tensor filter_valid(const diff::Tensor& plane) {
  const diff::Tensor as_chw = diff::reshape(plane, {1, plane.dim(0), plane.dim(1)});
  const diff::Tensor rows = diff::conv2d(as_chw, window_row(), nullptr, 1, 0);
  const diff::Tensor cols = diff::conv2d(rows, window_col(), nullptr, 1, 0);
  return diff::reshape(cols, {cols.dim(1), cols.dim(2)});
}

diff::Tensor ssim_plane(const diff::Tensor& a, const diff::Tensor& b) {
  const diff::Tensor mu_a = filter_valid(a);
  const diff::Tensor mu_b = filter_valid(b);
  const diff::Tensor e_aa = filter_valid(diff::square(a));
  const diff::Tensor e_bb = filter_valid(diff::square(b));
  const diff::Tensor e_ab = filter_valid(diff::mul(a, b));

  const diff::Tensor mu_ab = diff::mul(mu_a, mu_b);
  const diff::Tensor var_a = diff::sub(e_aa, diff::square(mu_a));
  const diff::Tensor var_b = diff::sub(e_bb, diff::square(mu_b));
  const diff::Tensor cov = diff::sub(e_ab, mu_ab);

  const diff::Tensor num = diff::mul(diff::add_scalar(diff::scale(mu_ab, 2.0), kC1),
                                     diff::add_scalar(diff::scale(cov, 2.0), kC2));
  const diff::Tensor den =
      diff::mul(diff::add_scalar(diff::add(diff::square(mu_a), diff::square(mu_b)), kC1),
                diff::add_scalar(diff::add(var_a, var_b), kC2));
  return diff::mean_all(diff::divide(num, den));
}

}  // namespace

diff::Tensor ssim_value(const diff::Tensor& a, const diff::Tensor& b) {
  if (a.shape() != b.shape()) {
    util::fail_invalid("ssim: shape mismatch " + util::shape_str(a.shape()) + " vs " +
                       util::shape_str(b.shape()));
  }
  if (a.rank() != 2 && a.rank() != 3) {
    util::fail_invalid("ssim: expected (H,W) or (H,W,C), got " + util::shape_str(a.shape()));
  }
  if (a.dim(0) < kWindow || a.dim(1) < kWindow) {
    util::fail_invalid("ssim: image extents must be >= 11, got " + util::shape_str(a.shape()));
  }
  if (a.rank() == 2) return ssim_plane(a, b);

  const int64_t channels = a.dim(2);
  const diff::Tensor a_chw = diff::permute(a, {2, 0, 1});
  const diff::Tensor b_chw = diff::permute(b, {2, 0, 1});
  diff::Tensor acc = diff::Tensor::scalar(0.0);
  for (int64_t c = 0; c < channels; ++c) {
    const diff::Tensor pa =
        diff::reshape(diff::slice(a_chw, 0, c, 1), {a.dim(0), a.dim(1)});
    const diff::Tensor pb =
        diff::reshape(diff::slice(b_chw, 0, c, 1), {a.dim(0), a.dim(1)});
    acc = diff::add(acc, ssim_plane(pa, pb));
  }
  return diff::scale(acc, 1.0 / static_cast<double>(channels));
}

}  // namespace ocrf::render
