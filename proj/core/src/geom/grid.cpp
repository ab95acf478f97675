// SPDX-License-Identifier: Apache-2.0
#include "ocrf/geom/grid.hpp"

#include "ocrf/util/check.hpp"

namespace ocrf::geom {

void VoxelGridSpec::validate() const {
  if (voxel_size <= 0.0) util::fail_invalid("voxel grid: voxel_size must be positive");
  if (nx < 1 || ny < 1 || nz < 1) util::fail_invalid("voxel grid: dims must be >= 1");
}

std::vector<Vec3> voxel_centers(const VoxelGridSpec& spec) {
  spec.validate();
  std::vector<Vec3> centers;
  centers.reserve(static_cast<std::size_t>(spec.count()));
  for (int i = 0; i < spec.nx; ++i) {
    for (int j = 0; j < spec.ny; ++j) {
      for (int k = 0; k < spec.nz; ++k) centers.push_back(spec.center(i, j, k));
    }
  }
  return centers;
}

}  // namespace ocrf::geom
