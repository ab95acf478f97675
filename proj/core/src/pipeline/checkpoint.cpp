// SPDX-License-Identifier: Apache-2.0
#include "ocrf/pipeline/checkpoint.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ocrf/io/blob.hpp"
#include "ocrf/util/check.hpp"

namespace ocrf::pipeline {

namespace {

constexpr const char* kMagic = "ocrf-checkpoint v1";

struct TensorRecord {
  std::string name;
  diff::Shape shape;
  uint64_t byte_offset = 0;
};

std::string shape_text(const diff::Shape& shape) {
  std::string out = std::to_string(shape.size());
  for (int64_t d : shape) out += " " + std::to_string(d);
  return out;
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  std::vector<double> blob;
  std::ostringstream manifest;
  manifest << kMagic << "\n";
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016" PRIx64, state.cfg.structural_hash());
  manifest << "config_hash " << hex << "\n";
  manifest << "step " << state.step << "\n";
  manifest << "rng";
  for (uint64_t word : state.rng.state()) {
    std::snprintf(hex, sizeof(hex), "%016" PRIx64, word);
    manifest << " " << hex;
  }
  manifest << "\n";

  auto append = [&](const std::string& name, const diff::Shape& shape,
                    const std::vector<double>& values) {
    manifest << "tensor " << name << " " << shape_text(shape) << " "
             << blob.size() * sizeof(double) << "\n";
    blob.insert(blob.end(), values.begin(), values.end());
  };
  for (const ParamSet::Entry& e : state.model.params.entries()) {
    append(e.name, e.value.shape(), e.value.values());
    append(e.name + ".adam_m", e.value.shape(), e.m);
    append(e.name + ".adam_v", e.value.shape(), e.v);
  }
  manifest << "blob_doubles " << blob.size() << "\n";

  const std::filesystem::path blob_path = path.string() + ".blob";
  const std::filesystem::path blob_tmp = blob_path.string() + ".tmp";
  io::write_f64_blob(blob_tmp, blob);
  std::filesystem::rename(blob_tmp, blob_path);
  io::write_text_atomic(path, manifest.str());
}

void load_checkpoint(const std::filesystem::path& path, TrainState& state) {
  std::ifstream in(path);
  if (!in) util::fail_invalid("checkpoint: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    util::fail_invalid("checkpoint: bad magic in " + path.string());
  }

  uint64_t config_hash = 0;
  int64_t step = -1;
  std::array<uint64_t, 4> rng_state{};
  bool have_rng = false;
  std::vector<TensorRecord> records;
  uint64_t blob_doubles = 0;
  bool have_blob_len = false;

  while (std::getline(in, line)) {
    std::istringstream is(line);
    std::string tag;
    is >> tag;
    if (tag == "config_hash") {
      std::string hex;
      is >> hex;
      config_hash = std::stoull(hex, nullptr, 16);
    } else if (tag == "step") {
      is >> step;
    } else if (tag == "rng") {
      for (auto& word : rng_state) {
        std::string hex;
        if (!(is >> hex)) util::fail_invalid("checkpoint: truncated rng state");
        word = std::stoull(hex, nullptr, 16);
      }
      have_rng = true;
    } else if (tag == "tensor") {
      TensorRecord rec;
      std::size_t rank = 0;
      if (!(is >> rec.name >> rank)) util::fail_invalid("checkpoint: bad tensor line");
      rec.shape.resize(rank);
      for (auto& d : rec.shape) {
        if (!(is >> d)) util::fail_invalid("checkpoint: bad tensor shape");
      }
      if (!(is >> rec.byte_offset)) util::fail_invalid("checkpoint: bad tensor offset");
      records.push_back(std::move(rec));
    } else if (tag == "blob_doubles") {
      is >> blob_doubles;
      have_blob_len = true;
    } else if (!tag.empty()) {
      util::fail_invalid("checkpoint: unknown manifest tag '" + tag + "'");
    }
  }
  if (step < 0 || !have_rng || !have_blob_len) {
    util::fail_invalid("checkpoint: incomplete manifest " + path.string());
  }
  if (config_hash != state.cfg.structural_hash()) {
    util::fail_invalid("checkpoint: config hash mismatch (checkpoint vs current config)");
  }

  const std::vector<double> blob = io::read_f64_blob(path.string() + ".blob");
  if (blob.size() != blob_doubles) {
    util::fail_invalid("checkpoint: blob length " + std::to_string(blob.size()) +
                       " does not match manifest " + std::to_string(blob_doubles));
  }

  auto& entries = state.model.params.entries();
  if (records.size() != entries.size() * 3) {
    util::fail_invalid("checkpoint: manifest lists " + std::to_string(records.size()) +
                       " tensors, model expects " + std::to_string(entries.size() * 3));
  }
  auto read_into = [&](const TensorRecord& rec, const std::string& want_name,
                       const diff::Shape& want_shape, std::vector<double>& dst) {
    if (rec.name != want_name) {
      util::fail_invalid("checkpoint: manifest diff at '" + rec.name + "', expected '" +
                         want_name + "'");
    }
    if (rec.shape != want_shape) {
      util::fail_invalid("checkpoint: shape mismatch for '" + rec.name + "': stored " +
                         util::shape_str(rec.shape) + ", expected " +
                         util::shape_str(want_shape));
    }
    if (rec.byte_offset % sizeof(double) != 0) {
      util::fail_invalid("checkpoint: misaligned offset for '" + rec.name + "'");
    }
    const std::size_t start = rec.byte_offset / sizeof(double);
    const std::size_t count = dst.size();
    if (start + count > blob.size()) {
      util::fail_invalid("checkpoint: blob too short for '" + rec.name + "'");
    }
    std::copy(blob.begin() + static_cast<std::ptrdiff_t>(start),
              blob.begin() + static_cast<std::ptrdiff_t>(start + count), dst.begin());
  };
  for (std::size_t i = 0; i < entries.size(); ++i) {
    ParamSet::Entry& e = entries[i];
    read_into(records[i * 3], e.name, e.value.shape(), e.value.values());
    read_into(records[i * 3 + 1], e.name + ".adam_m", e.value.shape(), e.m);
    read_into(records[i * 3 + 2], e.name + ".adam_v", e.value.shape(), e.v);
  }
  state.step = step;
  state.rng.set_state(rng_state);
}

}  // namespace ocrf::pipeline
