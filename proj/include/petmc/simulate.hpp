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

#ifndef PETMC_SIMULATE_HPP
#define PETMC_SIMULATE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "petmc/geom.hpp"
#include "petmc/motion.hpp"
#include "petmc/rng.hpp"
#include "petmc/siddon.hpp"
#include "petmc/volume.hpp"

namespace petmc {

/// Idealized continuous detector cylinder around the z axis.
struct ScannerGeometry {
  double radius_mm = 160.0;
  double axial_halflength_mm = 120.0;
};

/// One coincidence: detection time plus the two LOR endpoints on the
/// cylinder, scanner frame.
struct ListModeEvent {
  double t_s;
  Vec3 a_mm;
  Vec3 b_mm;
};

struct EventStream {
  std::vector<ListModeEvent> events;
  double duration_s = 0.0;
  std::uint64_t true_emission_count = 0;
};

/// Both intersections of the infinite line point + s*dir with the cylinder,
/// or nullopt if the line misses it or either intersection exits axially.
inline std::optional<std::pair<Vec3, Vec3>> cylinder_intersect(const Vec3& point_mm, const Vec3& dir,
                                                               const ScannerGeometry& geom) {
  const double n2 = dot(dir, dir);
  if (n2 == 0.0) throw std::invalid_argument("cylinder_intersect: zero direction");
  const double a2 = dir[0] * dir[0] + dir[1] * dir[1];
  if (a2 == 0.0) return std::nullopt;
  const double b = point_mm[0] * dir[0] + point_mm[1] * dir[1];
  const double c = point_mm[0] * point_mm[0] + point_mm[1] * point_mm[1] - geom.radius_mm * geom.radius_mm;
  const double disc = b * b - a2 * c;
  if (disc <= 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double q = -(b + std::copysign(sq, b));
  double s1, s2;
  if (q != 0.0) {
    s1 = q / a2;
    s2 = c / q;
  } else {
    s1 = -sq / a2;
    s2 = sq / a2;
  }
  if (s1 > s2) std::swap(s1, s2);
  const Vec3 pa = point_mm + s1 * dir;
  const Vec3 pb = point_mm + s2 * dir;
  if (std::abs(pa[2]) > geom.axial_halflength_mm || std::abs(pb[2]) > geom.axial_halflength_mm)
    return std::nullopt;
  return std::make_pair(pa, pb);
}

/// Generate `target_events` accepted coincidences from a moving activity
/// distribution. Emission origins are CDF-sampled over voxels and uniform
/// within the voxel, times uniform over the scan, directions isotropic.
/// Attenuation enters as thinning with survival exp(-integral of mu dl)
/// along the LOR through the moved head.
inline EventStream simulate_listmode(const Volume3D& activity, const Volume3D& attenuation,
                                     const MotionTrace& trace, const ScannerGeometry& geom,
                                     std::uint64_t target_events, std::uint64_t seed) {
  validate_volume(activity, true);
  validate_volume(attenuation, true);
  validate_trace(trace);

  EventStream stream;
  stream.duration_s = trace.duration_s;
  if (target_events == 0) return stream;

  std::vector<double> cdf(activity.data.size());
  double total = 0.0;
  for (std::size_t i = 0; i < activity.data.size(); ++i) {
    total += activity.data[i];
    cdf[i] = total;
  }
  if (!(total > 0.0))
    throw std::invalid_argument("simulate_listmode: zero-integral activity with target_events > 0");

  const GridSpec mu_grid = GridSpec::from_volume(attenuation);
  const bool has_mu = std::any_of(attenuation.data.begin(), attenuation.data.end(),
                                  [](double m) { return m > 0.0; });
  const std::size_t nx = static_cast<std::size_t>(activity.dims[0]);
  const std::size_t ny = static_cast<std::size_t>(activity.dims[1]);

  Rng rng(seed);
  std::vector<PathSeg> path;
  stream.events.reserve(static_cast<std::size_t>(target_events));

  while (stream.events.size() < target_events) {
    ++stream.true_emission_count;

    const double u = rng.uniform() * total;
    const std::size_t flat = static_cast<std::size_t>(
        std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    const int ix = static_cast<int>(flat % nx);
    const int iy = static_cast<int>((flat / nx) % ny);
    const int iz = static_cast<int>(flat / (nx * ny));

    Vec3 origin = activity.voxel_center(ix, iy, iz);
    for (int ax = 0; ax < 3; ++ax) origin[ax] += (rng.uniform() - 0.5) * activity.voxel_mm[ax];

    const double t = rng.uniform() * trace.duration_s;
    const RigidPose& pose = pose_at(trace, t);
    const RigidTransform T = pose_to_transform(pose);
    const Vec3 world = transform_apply(T, origin);
    const Vec3 dir = rng.unit_vector();

    const auto hit = cylinder_intersect(world, dir, geom);
    if (!hit) continue;

    if (has_mu) {
      const RigidTransform inv = transform_inverse(T);
      siddon_path(transform_apply(inv, hit->first), transform_apply(inv, hit->second), mu_grid, path);
      const double survival = std::exp(-path_integral(path, attenuation.data));
      if (!(rng.uniform() < survival)) continue;
    }
    stream.events.push_back({t, hit->first, hit->second});
  }

  std::stable_sort(stream.events.begin(), stream.events.end(),
                   [](const ListModeEvent& a, const ListModeEvent& b) { return a.t_s < b.t_s; });
  return stream;
}

// ---------------------------------------------------------------------------
// List-mode file: little-endian; magic "PLM1", u32 version=1, f64 duration_s,
// u64 true_emission_count, u64 n_events, then per event f32 t_s plus 6 f32
// endpoint coordinates.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_f32(std::ostream& os, double v) {
  const float f = static_cast<float>(v);
  os.write(reinterpret_cast<const char*>(&f), 4);
}

inline float take_f32(std::istream& is) {
  float f = 0.0f;
  is.read(reinterpret_cast<char*>(&f), 4);
  return f;
}

}  // namespace detail

inline void write_listmode(const EventStream& stream, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_listmode: cannot open " + path);
  os.write("PLM1", 4);
  const std::uint32_t version = 1;
  os.write(reinterpret_cast<const char*>(&version), 4);
  os.write(reinterpret_cast<const char*>(&stream.duration_s), 8);
  os.write(reinterpret_cast<const char*>(&stream.true_emission_count), 8);
  const std::uint64_t n = stream.events.size();
  os.write(reinterpret_cast<const char*>(&n), 8);
  for (const ListModeEvent& e : stream.events) {
    // narrowing to f32 can round a late event up to (or past) the f64
    // duration; keep the stored time inside [0, duration)
    float t = static_cast<float>(e.t_s);
    while (static_cast<double>(t) >= stream.duration_s && t > 0.0f) t = std::nextafter(t, 0.0f);
    os.write(reinterpret_cast<const char*>(&t), 4);
    for (int ax = 0; ax < 3; ++ax) detail::put_f32(os, e.a_mm[ax]);
    for (int ax = 0; ax < 3; ++ax) detail::put_f32(os, e.b_mm[ax]);
  }
  if (!os) throw std::runtime_error("write_listmode: write failed for " + path);
}

inline EventStream read_listmode(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_listmode: cannot open " + path);
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "PLM1")
    throw std::runtime_error("read_listmode: corrupt file (bad magic) in " + path);
  std::uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), 4);
  if (!is || version != 1)
    throw std::runtime_error("read_listmode: corrupt file (unsupported version) in " + path);
  EventStream stream;
  is.read(reinterpret_cast<char*>(&stream.duration_s), 8);
  is.read(reinterpret_cast<char*>(&stream.true_emission_count), 8);
  std::uint64_t n = 0;
  is.read(reinterpret_cast<char*>(&n), 8);
  if (!is) throw std::runtime_error("read_listmode: corrupt file (truncated header) in " + path);
  stream.events.resize(static_cast<std::size_t>(n));
  for (ListModeEvent& e : stream.events) {
    e.t_s = detail::take_f32(is);
    for (int ax = 0; ax < 3; ++ax) e.a_mm[ax] = detail::take_f32(is);
    for (int ax = 0; ax < 3; ++ax) e.b_mm[ax] = detail::take_f32(is);
  }
  if (!is) throw std::runtime_error("read_listmode: corrupt file (truncated payload) in " + path);
  is.peek();
  if (!is.eof()) throw std::runtime_error("read_listmode: corrupt file (trailing bytes) in " + path);
  return stream;
}

}  // namespace petmc

#endif  // PETMC_SIMULATE_HPP
