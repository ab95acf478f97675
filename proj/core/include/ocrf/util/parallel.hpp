// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>

namespace ocrf::util {

// Worker cap: min(hardware threads, OCRF_THREADS if set). Always >= 1.
int worker_count();

// Runs fn(i) for i in [0, n). Chunks are disjoint, so this is only safe for
// bodies with disjoint writes and no cross-iteration reductions; anything
// order-sensitive must stay on the serial path.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

}  // namespace ocrf::util
