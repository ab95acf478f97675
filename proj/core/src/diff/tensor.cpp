// SPDX-License-Identifier: Apache-2.0
#include "ocrf/diff/tensor.hpp"

#include <stdexcept>

#include "ocrf/util/check.hpp"

namespace ocrf::diff {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d <= 0) util::fail_invalid("tensor shape has non-positive extent " + util::shape_str(shape));
    n *= d;
  }
  return n;
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad)
    : shape_(std::move(shape)), requires_grad_(requires_grad) {
  const int64_t n = shape_numel(shape_);
  values_ = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n), fill);
  if (requires_grad_) ensure_grad();
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
  const int64_t n = shape_numel(shape);
  if (n != static_cast<int64_t>(values.size())) {
    util::fail_invalid("tensor value count " + std::to_string(values.size()) +
                       " does not match shape " + util::shape_str(shape));
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.values_ = std::make_shared<std::vector<double>>(std::move(values));
  t.requires_grad_ = requires_grad;
  if (requires_grad) t.ensure_grad();
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_values({1}, {value}, requires_grad);
}

int64_t Tensor::numel() const { return values_ ? static_cast<int64_t>(values_->size()) : 0; }

double* Tensor::data() { return values_->data(); }
const double* Tensor::data() const { return values_->data(); }

void Tensor::ensure_grad() {
  if (!grad_) grad_ = std::make_shared<std::vector<double>>(values_->size(), 0.0);
}

double* Tensor::grad() { return grad_ ? grad_->data() : nullptr; }
const double* Tensor::grad() const { return grad_ ? grad_->data() : nullptr; }

double Tensor::item() const {
  if (numel() != 1) util::fail_invalid("item() on non-scalar tensor " + util::shape_str(shape_));
  return (*values_)[0];
}

int64_t Tensor::offset2(int64_t i, int64_t j) const { return i * shape_[1] + j; }
int64_t Tensor::offset3(int64_t i, int64_t j, int64_t k) const {
  return (i * shape_[1] + j) * shape_[2] + k;
}
int64_t Tensor::offset4(int64_t i, int64_t j, int64_t k, int64_t l) const {
  return ((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l;
}

double& Tensor::at(int64_t i) { return (*values_)[static_cast<std::size_t>(i)]; }
double& Tensor::at(int64_t i, int64_t j) { return (*values_)[static_cast<std::size_t>(offset2(i, j))]; }
double& Tensor::at(int64_t i, int64_t j, int64_t k) {
  return (*values_)[static_cast<std::size_t>(offset3(i, j, k))];
}
double& Tensor::at(int64_t i, int64_t j, int64_t k, int64_t l) {
  return (*values_)[static_cast<std::size_t>(offset4(i, j, k, l))];
}
double Tensor::at(int64_t i) const { return (*values_)[static_cast<std::size_t>(i)]; }
double Tensor::at(int64_t i, int64_t j) const {
  return (*values_)[static_cast<std::size_t>(offset2(i, j))];
}
double Tensor::at(int64_t i, int64_t j, int64_t k) const {
  return (*values_)[static_cast<std::size_t>(offset3(i, j, k))];
}
double Tensor::at(int64_t i, int64_t j, int64_t k, int64_t l) const {
  return (*values_)[static_cast<std::size_t>(offset4(i, j, k, l))];
}

Tensor Tensor::detach() const {
  Tensor t;
  t.shape_ = shape_;
  t.values_ = values_;
  t.requires_grad_ = false;
  return t;
}

Tensor Tensor::reshaped(Shape new_shape) const {
  if (shape_numel(new_shape) != numel()) {
    util::fail_invalid("reshape from " + util::shape_str(shape_) + " to " +
                       util::shape_str(new_shape) + " changes element count");
  }
  Tensor t = *this;
  t.shape_ = std::move(new_shape);
  return t;
}

}  // namespace ocrf::diff
