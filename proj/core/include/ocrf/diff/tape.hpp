// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "ocrf/diff/tensor.hpp"

namespace ocrf::diff {

/// Ordered record of executed operations. Each record carries a closure that
/// propagates the output gradient of one operation to its inputs; replaying
/// the records in reverse execution order visits every operation exactly once
/// and is a valid reverse topological order of the graph.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  void record(BackwardFn fn) { records_.push_back(std::move(fn)); }

  /// Registers a gradient buffer for zeroing at the start of backward.
  void register_grad(const std::shared_ptr<std::vector<double>>& buffer);

  /// Seeds d(root)/d(root) = 1 and replays the tape in reverse. The root must
  /// be scalar; every reachable tensor with a gradient buffer ends up holding
  /// d(root)/d(tensor).
  void backward(const Tensor& root);

  std::size_t op_count() const { return records_.size(); }
  void clear();

 private:
  std::vector<BackwardFn> records_;
  std::vector<std::shared_ptr<std::vector<double>>> grad_buffers_;
  std::unordered_set<const std::vector<double>*> seen_buffers_;
};

/// Ambient tape used by the operation suite; null means pure value mode.
Tape* active_tape();

/// RAII activation of a tape for the current scope.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

}  // namespace ocrf::diff
