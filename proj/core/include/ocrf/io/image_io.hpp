// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <vector>

#include "ocrf/diff/tensor.hpp"
#include "ocrf/scene/image.hpp"

namespace ocrf::io {

/// Binary PPM (P6, 8-bit): each channel stored as round(255 * v), clamped.
void write_ppm(const std::filesystem::path& path, const scene::Image& img);
void write_ppm(const std::filesystem::path& path, const diff::Tensor& hw3);

/// Binary PGM (P5, 16-bit, big-endian samples per the PGM convention).
/// Values are scaled by `scale` and saturate at 65535; depth maps use
/// scale 1000 (millimeters), heatmaps in (0,1) use scale 65535.
void write_pgm16(const std::filesystem::path& path, int height, int width,
                 const std::vector<double>& values, double scale);
void write_pgm16(const std::filesystem::path& path, const diff::Tensor& hw, double scale);

}  // namespace ocrf::io
