// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <vector>

#include "ocrf/diff/tensor.hpp"

namespace ocrf::diff {

/// A scalar-valued function of its probe tensors. It is re-executed for the
/// finite-difference evaluations and must be pure in the probes.
using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

/// Compares the analytic gradient of `fn` at `probes` against central finite
/// differences with the given step. Returns the max over probe elements of
///   |analytic - central| / max(|analytic|, |central|, 1e-12).
double gradcheck(const ScalarFn& fn, std::vector<Tensor> probes,
                 double step = 1e-6);

}  // namespace ocrf::diff
