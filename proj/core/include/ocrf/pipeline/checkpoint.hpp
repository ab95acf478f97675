// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "ocrf/pipeline/train.hpp"

namespace ocrf::pipeline {

/// Checkpoint = text manifest at `path` plus one raw little-endian float64
/// blob at `path + ".blob"`. The manifest lists, per tensor, its name, shape
/// and byte offset into the blob; parameters are followed by their Adam
/// moments (<name>.adam_m / <name>.adam_v). Both files are written to temp
/// names and renamed, so a checkpoint is never observed half-written.
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);

/// Restores parameters, moments, step counter and RNG state into a state
/// freshly initialized from the same config. Rejects version, config-hash,
/// name/shape and blob-length mismatches, naming the first difference.
void load_checkpoint(const std::filesystem::path& path, TrainState& state);

}  // namespace ocrf::pipeline
