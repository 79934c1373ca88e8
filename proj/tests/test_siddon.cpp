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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <set>

#include "petmc/rng.hpp"
#include "petmc/siddon.hpp"
#include "petmc/volume.hpp"

using namespace petmc;

namespace {

// independent slab-clipping oracle: length of the segment inside the box
double clip_oracle(const Vec3& a, const Vec3& b, const GridSpec& g) {
  const Vec3 lo = g.bbox_min();
  const Vec3 hi = g.bbox_max();
  double t0 = 0.0, t1 = 1.0;
  for (int ax = 0; ax < 3; ++ax) {
    const double d = b[ax] - a[ax];
    if (d == 0.0) {
      if (a[ax] < lo[ax] || a[ax] > hi[ax]) return 0.0;
      continue;
    }
    double u0 = (lo[ax] - a[ax]) / d;
    double u1 = (hi[ax] - a[ax]) / d;
    if (u0 > u1) std::swap(u0, u1);
    t0 = std::max(t0, u0);
    t1 = std::min(t1, u1);
  }
  if (t1 <= t0) return 0.0;
  return (t1 - t0) * norm(b - a);
}

}  // namespace

TEST_CASE("axis-aligned ray through a 4^3 grid") {
  const Volume3D v = make_centered_volume({4, 4, 4}, {1.0, 1.0, 1.0});
  const GridSpec g = GridSpec::from_volume(v);
  // along x at the center of voxel row (iy=1, iz=2)
  const Vec3 row_y = v.voxel_center(0, 1, 2);
  const Vec3 a{-10.0, row_y[1], row_y[2]};
  const Vec3 b{10.0, row_y[1], row_y[2]};
  const auto path = siddon_path(a, b, g);
  REQUIRE(path.size() == 4);
  std::set<std::size_t> seen;
  for (const PathSeg& s : path) {
    REQUIRE(s.length_mm == Catch::Approx(1.0).margin(1e-9));
    seen.insert(s.voxel);
  }
  // exactly the four voxels of that row
  for (int ix = 0; ix < 4; ++ix) REQUIRE(seen.count(v.index(ix, 1, 2)) == 1);
}

TEST_CASE("segment outside the grid yields an empty path") {
  const Volume3D v = make_centered_volume({4, 4, 4}, {1.0, 1.0, 1.0});
  const GridSpec g = GridSpec::from_volume(v);
  REQUIRE(siddon_path({10, 10, 10}, {20, 10, 10}, g).empty());
  REQUIRE(siddon_path({-5, 0, 0}, {-3, 0, 0}, g).empty());
  // parallel to a face, just outside
  REQUIRE(siddon_path({-5, 2.01, 0}, {5, 2.01, 0}, g).empty());
  REQUIRE_THROWS_AS(siddon_path({1, 1, 1}, {1, 1, 1}, g), std::invalid_argument);
}

TEST_CASE("random segments: total length equals the clipped length") {
  const Volume3D v = make_centered_volume({13, 9, 17}, {1.7, 2.3, 0.9});
  const GridSpec g = GridSpec::from_volume(v);
  Rng rng(1);
  std::vector<PathSeg> path;
  int nonempty = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    Vec3 a, b;
    for (int ax = 0; ax < 3; ++ax) {
      a[ax] = rng.uniform(-30.0, 30.0);
      b[ax] = rng.uniform(-30.0, 30.0);
    }
    if (norm(b - a) < 1e-6) continue;
    siddon_path(a, b, g, path);
    double total = 0.0;
    std::set<std::size_t> seen;
    for (const PathSeg& s : path) {
      REQUIRE(s.length_mm > 0.0);
      REQUIRE(s.voxel < v.size());
      REQUIRE(seen.insert(s.voxel).second);  // no duplicates
      total += s.length_mm;
    }
    const double expect = clip_oracle(a, b, g);
    REQUIRE(total == Catch::Approx(expect).margin(1e-9));
    REQUIRE(clipped_length(a, b, g) == Catch::Approx(expect).margin(1e-9));
    if (!path.empty()) ++nonempty;
  }
  REQUIRE(nonempty > 2000);  // the box occupies a fair share of the sample cube
}

TEST_CASE("per-voxel lengths match dense sampling") {
  const Volume3D v = make_centered_volume({6, 6, 6}, {2.0, 2.0, 2.0});
  const GridSpec g = GridSpec::from_volume(v);
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    Vec3 a, b;
    for (int ax = 0; ax < 3; ++ax) {
      a[ax] = rng.uniform(-9.0, 9.0);
      b[ax] = rng.uniform(-9.0, 9.0);
    }
    if (norm(b - a) < 1.0) continue;
    const auto path = siddon_path(a, b, g);
    std::map<std::size_t, double> expect;
    const int n = 400000;
    const double seg = norm(b - a);
    for (int i = 0; i < n; ++i) {
      const double t = (i + 0.5) / n;
      const Vec3 p = a + t * (b - a);
      int idx[3];
      bool inside = true;
      for (int ax = 0; ax < 3; ++ax) {
        const double f = (p[ax] - (g.origin_mm[ax] - 0.5 * g.voxel_mm[ax])) / g.voxel_mm[ax];
        idx[ax] = static_cast<int>(std::floor(f));
        inside = inside && idx[ax] >= 0 && idx[ax] < g.dims[ax];
      }
      if (inside) expect[v.index(idx[0], idx[1], idx[2])] += seg / n;
    }
    for (const PathSeg& s : path) {
      const auto it = expect.find(s.voxel);
      const double sampled = (it == expect.end()) ? 0.0 : it->second;
      REQUIRE(s.length_mm == Catch::Approx(sampled).margin(5e-3 * seg));
    }
  }
}

TEST_CASE("path integral weights values by intersection length") {
  Volume3D v = make_centered_volume({4, 4, 4}, {1.0, 1.0, 1.0});
  Rng rng(3);
  for (double& x : v.data) x = rng.uniform();
  const GridSpec g = GridSpec::from_volume(v);
  const Vec3 c = v.voxel_center(0, 2, 1);
  const auto path = siddon_path({-10, c[1], c[2]}, {10, c[1], c[2]}, g);
  double expect = 0.0;
  for (int ix = 0; ix < 4; ++ix) expect += v.at(ix, 2, 1) * 1.0;
  REQUIRE(path_integral(path, v.data) == Catch::Approx(expect).margin(1e-9));
}

TEST_CASE("segments starting inside the grid") {
  const Volume3D v = make_centered_volume({8, 8, 8}, {1.0, 1.0, 1.0});
  const GridSpec g = GridSpec::from_volume(v);
  Rng rng(4);
  for (int trial = 0; trial < 2000; ++trial) {
    Vec3 a, b;
    for (int ax = 0; ax < 3; ++ax) {
      a[ax] = rng.uniform(-3.9, 3.9);
      b[ax] = rng.uniform(-3.9, 3.9);
    }
    if (norm(b - a) < 1e-3) continue;
    const auto path = siddon_path(a, b, g);
    double total = 0.0;
    for (const PathSeg& s : path) total += s.length_mm;
    REQUIRE(total == Catch::Approx(norm(b - a)).margin(1e-9));
  }
}
