// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

namespace ocrf::pipeline {

/// One named finite-difference check; returns the max relative error for the
/// given probe seed (step 1e-6 central differences).
struct GradCheckCase {
  std::string name;
  std::function<double(uint64_t seed)> run;
};

/// Every differentiable operation in the artifact: the diffcore suite, the
/// attribute decoders, both renderers, fusion, the three rendering losses,
/// opacity fusion, multiscale HSA, the mask head and the mask loss.
std::vector<GradCheckCase> gradcheck_suite();

struct GradCheckReport {
  std::string name;
  double max_rel_err = 0.0;
};

/// Runs every case on `seeds_per_case` probe seeds and keeps the worst error.
std::vector<GradCheckReport> run_gradcheck_suite(int seeds_per_case = 3);

}  // namespace ocrf::pipeline
