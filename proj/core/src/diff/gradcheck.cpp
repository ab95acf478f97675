// SPDX-License-Identifier: Apache-2.0
#include "ocrf/diff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "ocrf/diff/ops.hpp"
#include "ocrf/diff/tape.hpp"
#include "ocrf/util/check.hpp"

namespace ocrf::diff {

double gradcheck(const ScalarFn& fn, std::vector<Tensor> probes, double step) {
  if (step <= 0.0) util::fail_invalid("gradcheck: step must be positive");

  // Leaf copies so the probe buffers are the differentiated inputs.
  std::vector<Tensor> leaves;
  leaves.reserve(probes.size());
  for (const Tensor& p : probes) {
    leaves.push_back(Tensor::from_values(p.shape(), p.values(), /*requires_grad=*/true));
  }

  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor root = fn(leaves);
    if (root.numel() != 1) {
      util::fail_invalid("gradcheck: function under test must return a scalar");
    }
    tape.backward(root);
    for (const Tensor& leaf : leaves) analytic.emplace_back(*leaf.grad_buffer());
  }

  double max_rel = 0.0;
  for (std::size_t t = 0; t < leaves.size(); ++t) {
    Tensor& leaf = leaves[t];
    double* v = leaf.data();
    const int64_t n = leaf.numel();
    for (int64_t i = 0; i < n; ++i) {
      const double saved = v[i];
      v[i] = saved + step;
      const double up = fn(leaves).item();
      v[i] = saved - step;
      const double down = fn(leaves).item();
      v[i] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double an = analytic[t][static_cast<std::size_t>(i)];
      const double denom = std::max({std::fabs(an), std::fabs(fd), 1e-12});
      max_rel = std::max(max_rel, std::fabs(an - fd) / denom);
    }
  }
  return max_rel;
}

}  // namespace ocrf::diff
