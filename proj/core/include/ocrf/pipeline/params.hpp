// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "ocrf/diff/tensor.hpp"

namespace ocrf::pipeline {

/// Ordered registry of learnable tensors with their Adam moment buffers.
/// Registration order is fixed by construction, which pins the optimizer
/// iteration order and the checkpoint layout.
class ParamSet {
 public:
  struct Entry {
    std::string name;
    diff::Tensor value;
    std::vector<double> m;
    std::vector<double> v;
  };

  void add(const std::string& name, const diff::Tensor& value);
  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  const Entry* find(const std::string& name) const;
  int64_t total_elements() const;

  /// Adam with bias correction; t is the 1-based update count.
  void adam_step(double lr, double beta1, double beta2, double eps, int64_t t);

 private:
  std::vector<Entry> entries_;
};

}  // namespace ocrf::pipeline
