// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <vector>

namespace ocrf::diff {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);

/// Dense 64-bit float tensor with an optional same-shape gradient buffer.
///
/// Copies are shallow: they share the value and gradient storage, which is
/// what lets backward closures accumulate into the tensors the caller holds.
/// Gradients are additive; fan-out of a tensor into several operations sums
/// the branch contributions.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);

  static Tensor from_values(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(values_); }
  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
  int64_t numel() const;

  double* data();
  const double* data() const;
  std::vector<double>& values() { return *values_; }
  const std::vector<double>& values() const { return *values_; }

  bool requires_grad() const { return requires_grad_; }
  /// True once a gradient buffer exists, i.e. the tensor sits on a
  /// differentiable path.
  bool has_grad() const { return static_cast<bool>(grad_); }
  void ensure_grad();
  double* grad();
  const double* grad() const;
  const std::shared_ptr<std::vector<double>>& grad_buffer() const { return grad_; }
  const std::shared_ptr<std::vector<double>>& value_buffer() const { return values_; }

  /// Scalar accessor; rejects non-scalar tensors.
  double item() const;

  double& at(int64_t i);
  double& at(int64_t i, int64_t j);
  double& at(int64_t i, int64_t j, int64_t k);
  double& at(int64_t i, int64_t j, int64_t k, int64_t l);
  double at(int64_t i) const;
  double at(int64_t i, int64_t j) const;
  double at(int64_t i, int64_t j, int64_t k) const;
  double at(int64_t i, int64_t j, int64_t k, int64_t l) const;

  /// Value-sharing copy with gradient tracking stripped.
  Tensor detach() const;

  /// Metadata-only reinterpretation sharing both value and grad storage.
  /// The element count must match; row-major order is preserved.
  Tensor reshaped(Shape new_shape) const;

 private:
  int64_t offset2(int64_t i, int64_t j) const;
  int64_t offset3(int64_t i, int64_t j, int64_t k) const;
  int64_t offset4(int64_t i, int64_t j, int64_t k, int64_t l) const;

  std::shared_ptr<std::vector<double>> values_;
  std::shared_ptr<std::vector<double>> grad_;
  Shape shape_;
  bool requires_grad_ = false;
};

}  // namespace ocrf::diff
