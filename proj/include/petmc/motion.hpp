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

#ifndef PETMC_MOTION_HPP
#define PETMC_MOTION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "petmc/geom.hpp"
#include "petmc/rng.hpp"

namespace petmc {

/// 6-DOF rigid pose. The transform is x' = R x + t with R = Rz * Ry * Rx;
/// rotations act about the world origin, which by convention coincides with
/// the volume center.
struct RigidPose {
  Vec3 t_mm{0.0, 0.0, 0.0};
  Vec3 r_rad{0.0, 0.0, 0.0};
};

/// Matrix form of a rigid transform, x' = R x + t.
struct RigidTransform {
  double r[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  Vec3 t{0.0, 0.0, 0.0};
};

inline RigidTransform pose_to_transform(const RigidPose& p) {
  const double cx = std::cos(p.r_rad[0]), sx = std::sin(p.r_rad[0]);
  const double cy = std::cos(p.r_rad[1]), sy = std::sin(p.r_rad[1]);
  const double cz = std::cos(p.r_rad[2]), sz = std::sin(p.r_rad[2]);
  RigidTransform T;
  // R = Rz * Ry * Rx
  T.r[0][0] = cz * cy;
  T.r[0][1] = cz * sy * sx - sz * cx;
  T.r[0][2] = cz * sy * cx + sz * sx;
  T.r[1][0] = sz * cy;
  T.r[1][1] = sz * sy * sx + cz * cx;
  T.r[1][2] = sz * sy * cx - cz * sx;
  T.r[2][0] = -sy;
  T.r[2][1] = cy * sx;
  T.r[2][2] = cy * cx;
  T.t = p.t_mm;
  return T;
}

inline Vec3 transform_apply(const RigidTransform& T, const Vec3& x) {
  return {T.r[0][0] * x[0] + T.r[0][1] * x[1] + T.r[0][2] * x[2] + T.t[0],
          T.r[1][0] * x[0] + T.r[1][1] * x[1] + T.r[1][2] * x[2] + T.t[1],
          T.r[2][0] * x[0] + T.r[2][1] * x[1] + T.r[2][2] * x[2] + T.t[2]};
}

inline Vec3 pose_apply(const RigidPose& p, const Vec3& x) {
  return transform_apply(pose_to_transform(p), x);
}

inline RigidTransform transform_inverse(const RigidTransform& T) {
  RigidTransform inv;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) inv.r[i][j] = T.r[j][i];
  for (int i = 0; i < 3; ++i)
    inv.t[i] = -(inv.r[i][0] * T.t[0] + inv.r[i][1] * T.t[1] + inv.r[i][2] * T.t[2]);
  return inv;
}

/// Composition second(first(x)).
inline RigidTransform transform_compose(const RigidTransform& second, const RigidTransform& first) {
  RigidTransform c;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      c.r[i][j] =
          second.r[i][0] * first.r[0][j] + second.r[i][1] * first.r[1][j] + second.r[i][2] * first.r[2][j];
    }
  c.t = transform_apply(second, first.t);
  return c;
}

inline RigidTransform pose_inverse(const RigidPose& p) { return transform_inverse(pose_to_transform(p)); }

inline bool is_identity(const RigidPose& p) {
  return p.t_mm == Vec3{0.0, 0.0, 0.0} && p.r_rad == Vec3{0.0, 0.0, 0.0};
}

/// Piecewise-constant head pose over a scan. `breakpoints` are strictly
/// increasing interval start times beginning at 0; `poses[i]` holds on
/// [breakpoints[i], breakpoints[i+1]) and the last pose holds to duration_s.
struct MotionTrace {
  std::vector<double> breakpoints;
  std::vector<RigidPose> poses;
  double duration_s = 0.0;
};

inline void validate_trace(const MotionTrace& tr) {
  if (tr.breakpoints.empty() || tr.poses.size() != tr.breakpoints.size())
    throw std::invalid_argument("trace: one pose per breakpoint required");
  if (tr.breakpoints.front() != 0.0) throw std::invalid_argument("trace: first breakpoint must be 0");
  for (std::size_t i = 1; i < tr.breakpoints.size(); ++i)
    if (!(tr.breakpoints[i] > tr.breakpoints[i - 1]))
      throw std::invalid_argument("trace: breakpoints must be strictly increasing");
  if (!(tr.duration_s > tr.breakpoints.back()))
    throw std::invalid_argument("trace: last breakpoint must precede duration");
}

inline MotionTrace identity_trace(double duration_s) {
  MotionTrace tr;
  tr.breakpoints = {0.0};
  tr.poses = {RigidPose{}};
  tr.duration_s = duration_s;
  return tr;
}

inline bool is_identity(const MotionTrace& tr) {
  return std::all_of(tr.poses.begin(), tr.poses.end(), [](const RigidPose& p) { return is_identity(p); });
}

/// Index of the interval containing time t (left-closed intervals).
inline std::size_t interval_at(const MotionTrace& tr, double t) {
  if (!(t >= 0.0 && t < tr.duration_s)) throw std::invalid_argument("pose_at: t outside [0, duration)");
  const auto it = std::upper_bound(tr.breakpoints.begin(), tr.breakpoints.end(), t);
  return static_cast<std::size_t>(it - tr.breakpoints.begin()) - 1;
}

inline const RigidPose& pose_at(const MotionTrace& tr, double t) { return tr.poses[interval_at(tr, t)]; }

enum class TraceKind { none, step, drift, mixed };

inline TraceKind trace_kind_from_string(const std::string& s) {
  if (s == "none") return TraceKind::none;
  if (s == "step") return TraceKind::step;
  if (s == "drift") return TraceKind::drift;
  if (s == "mixed") return TraceKind::mixed;
  throw std::invalid_argument("unknown trace kind: " + s);
}

inline std::string to_string(TraceKind k) {
  switch (k) {
    case TraceKind::none: return "none";
    case TraceKind::step: return "step";
    case TraceKind::drift: return "drift";
    case TraceKind::mixed: return "mixed";
  }
  return "?";
}

struct TraceGenOptions {
  /// Draw pure translations of norm exactly `amplitude_mm` (no rotation).
  bool pure_translation = false;
  /// Rotation angle scale in radians per mm of amplitude.
  double rotation_rad_per_mm = 1.0 / 200.0;
};

/// Deterministic trace generator. Segment poses scale linearly with
/// `amplitude_mm` at fixed seed, which makes amplitude calibration exact.
inline MotionTrace gen_trace(TraceKind kind, double amplitude_mm, int n_segments, double duration_s,
                             std::uint64_t seed, const TraceGenOptions& opt = {}) {
  if (amplitude_mm < 0.0) throw std::invalid_argument("gen_trace: amplitude must be >= 0");
  if (n_segments < 1) throw std::invalid_argument("gen_trace: n_segments must be >= 1");
  if (!(duration_s > 0.0)) throw std::invalid_argument("gen_trace: duration must be positive");

  MotionTrace tr;
  tr.duration_s = duration_s;
  if (kind == TraceKind::none || amplitude_mm == 0.0) {
    tr.breakpoints = {0.0};
    tr.poses = {RigidPose{}};
    return tr;
  }

  Rng rng(seed);
  tr.breakpoints.resize(static_cast<std::size_t>(n_segments));
  tr.poses.resize(static_cast<std::size_t>(n_segments));
  for (int i = 0; i < n_segments; ++i)
    tr.breakpoints[static_cast<std::size_t>(i)] = duration_s * i / n_segments;

  // The first segment is always the reference pose (identity): the head
  // starts aligned with the phantom frame and moves afterwards.
  const Vec3 drift_dir = rng.unit_vector();
  for (int i = 1; i < n_segments; ++i) {
    RigidPose& p = tr.poses[static_cast<std::size_t>(i)];
    const Vec3 dir = rng.unit_vector();
    const double mag = opt.pure_translation ? 1.0 : rng.uniform(0.7, 1.3);
    std::array<double, 3> ang{rng.normal(), rng.normal(), rng.normal()};
    Vec3 step_r{0, 0, 0};
    if (!opt.pure_translation)
      for (int ax = 0; ax < 3; ++ax) step_r[ax] = ang[ax] * opt.rotation_rad_per_mm;
    const Vec3 step_t = mag * dir;
    const double frac = (n_segments > 1) ? static_cast<double>(i) / (n_segments - 1) : 1.0;

    switch (kind) {
      case TraceKind::step:
        p.t_mm = amplitude_mm * step_t;
        p.r_rad = amplitude_mm * step_r;
        break;
      case TraceKind::drift:
        p.t_mm = (amplitude_mm * frac) * drift_dir;
        break;
      case TraceKind::mixed:
        p.t_mm = (0.5 * amplitude_mm * frac) * drift_dir + (0.5 * amplitude_mm) * step_t;
        p.r_rad = (0.5 * amplitude_mm) * step_r;
        break;
      default: break;
    }
  }
  return tr;
}

/// Eight points on a sphere about the origin plus the origin itself; the
/// summary point set used by the motion magnitude metric.
inline std::vector<Vec3> default_head_points(double radius_mm = 70.0) {
  std::vector<Vec3> pts;
  pts.push_back({0, 0, 0});
  const double a = radius_mm / std::sqrt(3.0);
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1}) pts.push_back({sx * a, sy * a, sz * a});
  return pts;
}

/// Time-weighted mean displacement of `head_points` between each interval
/// pose and the reference pose (the pose at t = 0).
inline double motion_magnitude(const MotionTrace& tr, const std::vector<Vec3>& head_points) {
  validate_trace(tr);
  if (head_points.empty()) throw std::invalid_argument("motion_magnitude: empty point set");
  const RigidTransform ref = pose_to_transform(tr.poses.front());
  std::vector<Vec3> ref_pts(head_points.size());
  for (std::size_t j = 0; j < head_points.size(); ++j) ref_pts[j] = transform_apply(ref, head_points[j]);

  double acc = 0.0;
  const std::size_t n = tr.poses.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double t0 = tr.breakpoints[i];
    const double t1 = (i + 1 < n) ? tr.breakpoints[i + 1] : tr.duration_s;
    const double w = (t1 - t0) / tr.duration_s;
    const RigidTransform T = pose_to_transform(tr.poses[i]);
    double mean_disp = 0.0;
    for (std::size_t j = 0; j < head_points.size(); ++j)
      mean_disp += norm(transform_apply(T, head_points[j]) - ref_pts[j]);
    mean_disp /= static_cast<double>(head_points.size());
    acc += w * mean_disp;
  }
  return acc;
}

/// Bisect the generator amplitude so that the generated trace's motion
/// magnitude hits `target_mm`. Returns the calibrated amplitude.
inline double calibrate_trace_amplitude(TraceKind kind, double target_mm, int n_segments,
                                        double duration_s, std::uint64_t seed,
                                        const std::vector<Vec3>& head_points,
                                        const TraceGenOptions& opt = {}) {
  if (target_mm < 0.0) throw std::invalid_argument("calibrate_trace_amplitude: target must be >= 0");
  if (target_mm == 0.0) return 0.0;
  if (kind == TraceKind::none)
    throw std::runtime_error("calibrate_trace_amplitude: cannot reach a positive target with kind none");
  auto magnitude_of = [&](double amp) {
    return motion_magnitude(gen_trace(kind, amp, n_segments, duration_s, seed, opt), head_points);
  };
  double hi = std::max(target_mm, 1.0);
  double mhi = magnitude_of(hi);
  int guard = 0;
  while (mhi < target_mm && guard++ < 60) {
    hi *= 2.0;
    mhi = magnitude_of(hi);
  }
  if (mhi < target_mm) throw std::runtime_error("calibrate_trace_amplitude: cannot reach target");
  double lo = 0.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (magnitude_of(mid) < target_mm)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Trace CSV: header `t_s,tx_mm,ty_mm,tz_mm,rx_deg,ry_deg,rz_deg`, one row per
// breakpoint. Degrees in files, radians in memory. The scan duration is not
// part of the file and is supplied by the reader.
// ---------------------------------------------------------------------------

inline void write_trace_csv(const MotionTrace& tr, const std::string& path) {
  validate_trace(tr);
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_trace_csv: cannot open " + path);
  os << "t_s,tx_mm,ty_mm,tz_mm,rx_deg,ry_deg,rz_deg\n";
  os.precision(17);
  const double rad2deg = 180.0 / M_PI;
  for (std::size_t i = 0; i < tr.poses.size(); ++i) {
    const RigidPose& p = tr.poses[i];
    os << tr.breakpoints[i] << ',' << p.t_mm[0] << ',' << p.t_mm[1] << ',' << p.t_mm[2] << ','
       << p.r_rad[0] * rad2deg << ',' << p.r_rad[1] * rad2deg << ',' << p.r_rad[2] * rad2deg << '\n';
  }
  if (!os) throw std::runtime_error("write_trace_csv: write failed for " + path);
}

inline MotionTrace read_trace_csv(const std::string& path, double duration_s) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_trace_csv: cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line != "t_s,tx_mm,ty_mm,tz_mm,rx_deg,ry_deg,rz_deg")
    throw std::runtime_error("read_trace_csv: bad header in " + path);
  MotionTrace tr;
  tr.duration_s = duration_s;
  const double deg2rad = M_PI / 180.0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    std::array<double, 7> vals{};
    for (int k = 0; k < 7; ++k) {
      if (!std::getline(ss, field, ',')) throw std::runtime_error("read_trace_csv: short row in " + path);
      vals[static_cast<std::size_t>(k)] = std::stod(field);
    }
    tr.breakpoints.push_back(vals[0]);
    RigidPose p;
    p.t_mm = {vals[1], vals[2], vals[3]};
    p.r_rad = {vals[4] * deg2rad, vals[5] * deg2rad, vals[6] * deg2rad};
    tr.poses.push_back(p);
  }
  validate_trace(tr);
  return tr;
}

}  // namespace petmc

#endif  // PETMC_MOTION_HPP
