// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace ocrf::scene {

/// H x W x 3 image, row-major, values in [0,1].
struct Image {
  int height = 0, width = 0;
  std::vector<double> rgb;

  Image() = default;
  Image(int h, int w) : height(h), width(w), rgb(static_cast<std::size_t>(h) * w * 3, 0.0) {}

  double* pixel(int y, int x) { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
  const double* pixel(int y, int x) const {
    return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
};

/// H x W depth map in meters; 0 where no foreground hit.
struct DepthMap {
  int height = 0, width = 0;
  std::vector<double> d;

  DepthMap() = default;
  DepthMap(int h, int w) : height(h), width(w), d(static_cast<std::size_t>(h) * w, 0.0) {}

  double at(int y, int x) const { return d[static_cast<std::size_t>(y) * width + x]; }
  double& at(int y, int x) { return d[static_cast<std::size_t>(y) * width + x]; }
};

/// Clamp-to-edge bilinear lookup with pixel centers at (x+0.5, y+0.5).
std::array<double, 3> bilinear_sample(const Image& img, double u, double v);

}  // namespace ocrf::scene
