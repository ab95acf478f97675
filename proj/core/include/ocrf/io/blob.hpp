// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ocrf::io {

/// Raw little-endian 64-bit float blob IO.
void write_f64_blob(const std::filesystem::path& path, const std::vector<double>& values);
std::vector<double> read_f64_blob(const std::filesystem::path& path);

/// Atomic text write: temp file in the same directory, then rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace ocrf::io
