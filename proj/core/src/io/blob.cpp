// SPDX-License-Identifier: Apache-2.0
#include "ocrf/io/blob.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "ocrf/util/check.hpp"

static_assert(std::endian::native == std::endian::little,
              "blob IO assumes a little-endian host");

namespace ocrf::io {

void write_f64_blob(const std::filesystem::path& path, const std::vector<double>& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) util::fail_invalid("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!out) util::fail_invalid("short write: " + path.string());
}

std::vector<double> read_f64_blob(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) util::fail_invalid("cannot open for reading: " + path.string());
  const std::streamsize bytes = in.tellg();
  if (bytes % static_cast<std::streamsize>(sizeof(double)) != 0) {
    util::fail_invalid("blob size is not a multiple of 8 bytes: " + path.string());
  }
  in.seekg(0);
  std::vector<double> values(static_cast<std::size_t>(bytes) / sizeof(double));
  in.read(reinterpret_cast<char*>(values.data()), bytes);
  if (!in) util::fail_invalid("short read: " + path.string());
  return values;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) util::fail_invalid("cannot open for writing: " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) util::fail_invalid("short write: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace ocrf::io
