// SPDX-License-Identifier: Apache-2.0
#include "ocrf/io/image_io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>

#include "ocrf/util/check.hpp"

namespace ocrf::io {

namespace {

uint8_t to_byte(double v) {
  const double scaled = std::round(255.0 * v);
  return static_cast<uint8_t>(scaled < 0.0 ? 0.0 : (scaled > 255.0 ? 255.0 : scaled));
}

std::ofstream open_binary(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) util::fail_invalid("cannot open for writing: " + path.string());
  return out;
}

void write_ppm_raw(const std::filesystem::path& path, int height, int width,
                   const double* rgb) {
  std::ofstream out = open_binary(path);
  out << "P6\n" << width << " " << height << "\n255\n";
  std::vector<uint8_t> row(static_cast<std::size_t>(width) * 3);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        row[static_cast<std::size_t>(x) * 3 + c] =
            to_byte(rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]);
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const scene::Image& img) {
  write_ppm_raw(path, img.height, img.width, img.rgb.data());
}

void write_ppm(const std::filesystem::path& path, const diff::Tensor& hw3) {
  if (hw3.rank() != 3 || hw3.dim(2) != 3) {
    util::fail_invalid("write_ppm: expected (H,W,3) tensor, got " + util::shape_str(hw3.shape()));
  }
  write_ppm_raw(path, static_cast<int>(hw3.dim(0)), static_cast<int>(hw3.dim(1)), hw3.data());
}

void write_pgm16(const std::filesystem::path& path, int height, int width,
                 const std::vector<double>& values, double scale) {
  if (static_cast<std::size_t>(height) * width != values.size()) {
    util::fail_invalid("write_pgm16: value count does not match extents");
  }
  std::ofstream out = open_binary(path);
  out << "P5\n" << width << " " << height << "\n65535\n";
  std::vector<uint8_t> row(static_cast<std::size_t>(width) * 2);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double v = std::round(values[static_cast<std::size_t>(y) * width + x] * scale);
      if (v < 0.0) v = 0.0;
      if (v > 65535.0) v = 65535.0;
      const auto sample = static_cast<uint16_t>(v);
      row[static_cast<std::size_t>(x) * 2] = static_cast<uint8_t>(sample >> 8);
      row[static_cast<std::size_t>(x) * 2 + 1] = static_cast<uint8_t>(sample & 0xff);
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
}

void write_pgm16(const std::filesystem::path& path, const diff::Tensor& hw, double scale) {
  if (hw.rank() != 2) {
    util::fail_invalid("write_pgm16: expected (H,W) tensor, got " + util::shape_str(hw.shape()));
  }
  write_pgm16(path, static_cast<int>(hw.dim(0)), static_cast<int>(hw.dim(1)), hw.values(), scale);
}

}  // namespace ocrf::io
