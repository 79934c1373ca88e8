/*
 * petmc : list-mode PET simulation, motion-compensated reconstruction
 *         and AD/CN classification study toolkit
 *
 * Copyright 2026 the petmc developers
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef PETMC_SIDDON_HPP
#define PETMC_SIDDON_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "petmc/geom.hpp"
#include "petmc/volume.hpp"

namespace petmc {

/// Geometry of a voxel grid, decoupled from any payload.
struct GridSpec {
  std::array<int, 3> dims{1, 1, 1};
  Vec3 voxel_mm{1.0, 1.0, 1.0};
  Vec3 origin_mm{0.0, 0.0, 0.0};

  static GridSpec from_volume(const Volume3D& v) { return {v.dims, v.voxel_mm, v.origin_mm}; }

  /// Low corner of the grid bounding box (outer face of voxel (0,0,0)).
  Vec3 bbox_min() const {
    return {origin_mm[0] - 0.5 * voxel_mm[0], origin_mm[1] - 0.5 * voxel_mm[1],
            origin_mm[2] - 0.5 * voxel_mm[2]};
  }
  Vec3 bbox_max() const {
    return {origin_mm[0] + (dims[0] - 0.5) * voxel_mm[0], origin_mm[1] + (dims[1] - 0.5) * voxel_mm[1],
            origin_mm[2] + (dims[2] - 0.5) * voxel_mm[2]};
  }
};

/// One traversed voxel: flat index into x-fastest storage plus the
/// intersection length of the segment with that voxel.
struct PathSeg {
  std::size_t voxel;
  double length_mm;
};

/// Exact voxel traversal of the segment a→b clipped to the grid box.
/// Appends (voxel, length) pairs to `out` (cleared first). The traversal
/// guarantees Σ length = clipped segment length up to rounding.
inline void siddon_path(const Vec3& a_mm, const Vec3& b_mm, const GridSpec& grid,
                        std::vector<PathSeg>& out) {
  out.clear();
  const Vec3 d = b_mm - a_mm;
  const double seg_len = norm(d);
  if (seg_len == 0.0) throw std::invalid_argument("siddon_path: degenerate segment");

  const Vec3 lo = grid.bbox_min();
  const Vec3 hi = grid.bbox_max();

  // Clip [0,1] parameter range to the box (slab method).
  double t0 = 0.0, t1 = 1.0;
  for (int ax = 0; ax < 3; ++ax) {
    if (d[ax] != 0.0) {
      double ta = (lo[ax] - a_mm[ax]) / d[ax];
      double tb = (hi[ax] - a_mm[ax]) / d[ax];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
    } else if (a_mm[ax] < lo[ax] || a_mm[ax] > hi[ax]) {
      return;
    }
  }
  if (!(t0 < t1)) return;

  const std::size_t sx = 1;
  const std::size_t sy = static_cast<std::size_t>(grid.dims[0]);
  const std::size_t sz = sy * static_cast<std::size_t>(grid.dims[1]);
  const std::size_t strides[3] = {sx, sy, sz};

  // Entry voxel.
  int idx[3];
  for (int ax = 0; ax < 3; ++ax) {
    const double p = a_mm[ax] + t0 * d[ax];
    int i = static_cast<int>(std::floor((p - lo[ax]) / grid.voxel_mm[ax]));
    idx[ax] = std::clamp(i, 0, grid.dims[ax] - 1);
  }

  // Per-axis stepping state in t units.
  double t_next[3];
  double t_delta[3];
  int step[3];
  for (int ax = 0; ax < 3; ++ax) {
    if (d[ax] > 0.0) {
      step[ax] = 1;
      t_delta[ax] = grid.voxel_mm[ax] / d[ax];
      t_next[ax] = (lo[ax] + (idx[ax] + 1) * grid.voxel_mm[ax] - a_mm[ax]) / d[ax];
    } else if (d[ax] < 0.0) {
      step[ax] = -1;
      t_delta[ax] = -grid.voxel_mm[ax] / d[ax];
      t_next[ax] = (lo[ax] + idx[ax] * grid.voxel_mm[ax] - a_mm[ax]) / d[ax];
    } else {
      step[ax] = 0;
      t_delta[ax] = std::numeric_limits<double>::infinity();
      t_next[ax] = std::numeric_limits<double>::infinity();
    }
  }

  double t_cur = t0;
  const int max_steps = grid.dims[0] + grid.dims[1] + grid.dims[2] + 3;
  for (int it = 0; it < max_steps && t_cur < t1; ++it) {
    int ax = 0;
    if (t_next[1] < t_next[ax]) ax = 1;
    if (t_next[2] < t_next[ax]) ax = 2;
    const double t_stop = std::min(t_next[ax], t1);
    const double len = (t_stop - t_cur) * seg_len;
    if (len > 0.0) {
      const std::size_t flat = static_cast<std::size_t>(idx[0]) * strides[0] +
                               static_cast<std::size_t>(idx[1]) * strides[1] +
                               static_cast<std::size_t>(idx[2]) * strides[2];
      out.push_back({flat, len});
    }
    t_cur = t_stop;
    if (t_next[ax] >= t1) break;
    idx[ax] += step[ax];
    if (idx[ax] < 0 || idx[ax] >= grid.dims[ax]) break;
    t_next[ax] += t_delta[ax];
  }
}

inline std::vector<PathSeg> siddon_path(const Vec3& a_mm, const Vec3& b_mm, const GridSpec& grid) {
  std::vector<PathSeg> out;
  siddon_path(a_mm, b_mm, grid, out);
  return out;
}

/// Σ value[voxel] · length over the traversed path (line integral of a
/// voxelized field, e.g. ∫ μ dl for attenuation).
inline double path_integral(const std::vector<PathSeg>& path, const std::vector<double>& values) {
  double acc = 0.0;
  for (const PathSeg& s : path) acc += values[s.voxel] * s.length_mm;
  return acc;
}

/// Length of segment a→b clipped to the grid box; the analytic oracle for
/// Σ path lengths.
inline double clipped_length(const Vec3& a_mm, const Vec3& b_mm, const GridSpec& grid) {
  const Vec3 d = b_mm - a_mm;
  const Vec3 lo = grid.bbox_min();
  const Vec3 hi = grid.bbox_max();
  double t0 = 0.0, t1 = 1.0;
  for (int ax = 0; ax < 3; ++ax) {
    if (d[ax] != 0.0) {
      double ta = (lo[ax] - a_mm[ax]) / d[ax];
      double tb = (hi[ax] - a_mm[ax]) / d[ax];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
    } else if (a_mm[ax] < lo[ax] || a_mm[ax] > hi[ax]) {
      return 0.0;
    }
  }
  return (t0 < t1) ? (t1 - t0) * norm(d) : 0.0;
}

}  // namespace petmc

#endif  // PETMC_SIDDON_HPP
