// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "ocrf/geom/types.hpp"

namespace ocrf::geom {

/// Regular voxel lattice over the perception range. `origin` is the min
/// corner; voxel (i,j,k) spans origin + voxel_size * [i,i+1) x [j,j+1) x [k,k+1).
struct VoxelGridSpec {
  Vec3 origin;
  double voxel_size = 1.0;
  int nx = 1, ny = 1, nz = 1;

  void validate() const;

  int64_t count() const { return static_cast<int64_t>(nx) * ny * nz; }
  /// Flat index with z fastest: ((i*ny)+j)*nz + k.
  int64_t flat(int i, int j, int k) const {
    return (static_cast<int64_t>(i) * ny + j) * nz + k;
  }
  Vec3 center(int i, int j, int k) const {
    return {origin.x + voxel_size * (i + 0.5), origin.y + voxel_size * (j + 0.5),
            origin.z + voxel_size * (k + 0.5)};
  }
  Vec3 max_corner() const {
    return {origin.x + voxel_size * nx, origin.y + voxel_size * ny, origin.z + voxel_size * nz};
  }
  /// Metric diagonal of the perception range.
  double diagonal() const {
    const Vec3 e = max_corner() - origin;
    return e.norm();
  }
  bool contains(const Vec3& p) const {
    const Vec3 hi = max_corner();
    return p.x >= origin.x && p.x < hi.x && p.y >= origin.y && p.y < hi.y && p.z >= origin.z &&
           p.z < hi.z;
  }
};

/// Centers of all voxels in flat-index order.
std::vector<Vec3> voxel_centers(const VoxelGridSpec& spec);

}  // namespace ocrf::geom
