// SPDX-License-Identifier: Apache-2.0
#include "ocrf/diff/tape.hpp"

#include <algorithm>

#include "ocrf/util/check.hpp"

namespace ocrf::diff {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

void Tape::register_grad(const std::shared_ptr<std::vector<double>>& buffer) {
  if (!buffer) return;
  if (seen_buffers_.insert(buffer.get()).second) grad_buffers_.push_back(buffer);
}

void Tape::backward(const Tensor& root) {
  if (root.numel() != 1) {
    util::fail_invalid("backward root must be scalar, got shape " + util::shape_str(root.shape()));
  }
  if (!root.has_grad()) {
    // Root is constant w.r.t. everything on this tape; nothing to do.
    return;
  }
  for (auto& buffer : grad_buffers_) std::fill(buffer->begin(), buffer->end(), 0.0);
  (*root.grad_buffer())[0] = 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
}

void Tape::clear() {
  records_.clear();
  grad_buffers_.clear();
  seen_buffers_.clear();
}

}  // namespace ocrf::diff
