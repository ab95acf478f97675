// SPDX-License-Identifier: Apache-2.0
#include "ocrf/pipeline/params.hpp"

#include <cmath>

#include "ocrf/util/check.hpp"

namespace ocrf::pipeline {

void ParamSet::add(const std::string& name, const diff::Tensor& value) {
  if (!value.requires_grad()) {
    util::fail_invalid("param '" + name + "' must require gradients");
  }
  if (find(name)) util::fail_invalid("duplicate param name '" + name + "'");
  Entry e;
  e.name = name;
  e.value = value;
  e.m.assign(static_cast<std::size_t>(value.numel()), 0.0);
  e.v.assign(static_cast<std::size_t>(value.numel()), 0.0);
  entries_.push_back(std::move(e));
}

const ParamSet::Entry* ParamSet::find(const std::string& name) const {
  for (const Entry& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

int64_t ParamSet::total_elements() const {
  int64_t n = 0;
  for (const Entry& e : entries_) n += e.value.numel();
  return n;
}

void ParamSet::adam_step(double lr, double beta1, double beta2, double eps, int64_t t) {
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (Entry& e : entries_) {
    double* p = e.value.data();
    const double* g = e.value.grad();
    const int64_t n = e.value.numel();
    for (int64_t i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      e.m[ui] = beta1 * e.m[ui] + (1.0 - beta1) * g[i];
      e.v[ui] = beta2 * e.v[ui] + (1.0 - beta2) * g[i] * g[i];
      const double mhat = e.m[ui] / bc1;
      const double vhat = e.v[ui] / bc2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

}  // namespace ocrf::pipeline
