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

#ifndef PETMC_RECON_HPP
#define PETMC_RECON_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "petmc/geom.hpp"
#include "petmc/motion.hpp"
#include "petmc/rng.hpp"
#include "petmc/siddon.hpp"
#include "petmc/simulate.hpp"
#include "petmc/volume.hpp"

namespace petmc {

struct ReconConfig {
  int iterations = 2;
  int subsets = 30;
  double psf_fwhm_mm = 2.5;
  std::array<int, 3> grid_dims{64, 64, 64};
  Vec3 grid_voxel_mm{3.0, 3.0, 3.0};
  int sensitivity_lors = 200000;
  double epsilon = 1e-9;
};

inline void validate_recon_config(const ReconConfig& c) {
  if (c.iterations < 1) throw std::invalid_argument("recon: iterations must be >= 1");
  if (c.subsets < 1) throw std::invalid_argument("recon: subsets must be >= 1");
  if (c.psf_fwhm_mm < 0.0) throw std::invalid_argument("recon: psf_fwhm_mm must be >= 0");
  if (c.sensitivity_lors < 1) throw std::invalid_argument("recon: sensitivity_lors must be >= 1");
  if (!(c.epsilon > 0.0)) throw std::invalid_argument("recon: epsilon must be positive");
  for (int ax = 0; ax < 3; ++ax) {
    if (c.grid_dims[ax] < 1) throw std::invalid_argument("recon: grid dims must be >= 1");
    if (!(c.grid_voxel_mm[ax] > 0.0)) throw std::invalid_argument("recon: voxel size must be positive");
  }
}

/// Detection-probability normalizer for the OSEM update, tagged with the
/// mode it was estimated for.
struct SensitivityImage {
  Volume3D image;
  bool motion_compensated = false;
};

/// Monte Carlo sensitivity estimate over uniformly sampled cylinder LORs.
/// Each LOR is weighted by attenuation survival; in MC mode (trace
/// non-null) the LOR is mapped into the head frame per trace interval and
/// the contributions are weighted by interval duration. PSF blur is applied
/// to the accumulated backprojection.
inline SensitivityImage sensitivity_image(const ScannerGeometry& geom, const Volume3D& attenuation,
                                          const MotionTrace* trace, const ReconConfig& config,
                                          std::uint64_t seed) {
  validate_recon_config(config);
  validate_volume(attenuation, true);
  const MotionTrace fallback = identity_trace(1.0);
  const MotionTrace& tr = trace ? *trace : fallback;
  validate_trace(tr);

  SensitivityImage out;
  out.motion_compensated = (trace != nullptr);
  out.image = make_centered_volume(config.grid_dims, config.grid_voxel_mm);
  Volume3D& S = out.image;
  const GridSpec grid = GridSpec::from_volume(S);
  const GridSpec mu_grid = GridSpec::from_volume(attenuation);
  const bool shared_grid = S.same_grid(attenuation);

  const std::size_t n_intervals = tr.poses.size();
  std::vector<double> weight(n_intervals);
  std::vector<RigidTransform> inv(n_intervals);
  for (std::size_t i = 0; i < n_intervals; ++i) {
    const double t0 = tr.breakpoints[i];
    const double t1 = (i + 1 < n_intervals) ? tr.breakpoints[i + 1] : tr.duration_s;
    weight[i] = (t1 - t0) / tr.duration_s;
    inv[i] = pose_inverse(tr.poses[i]);
  }

  Rng rng(seed);
  std::vector<PathSeg> path, mu_path;
  const double two_pi = 2.0 * M_PI;
  for (int l = 0; l < config.sensitivity_lors; ++l) {
    Vec3 ends[2];
    for (auto& e : ends) {
      const double theta = rng.uniform() * two_pi;
      const double z = rng.uniform(-geom.axial_halflength_mm, geom.axial_halflength_mm);
      e = {geom.radius_mm * std::cos(theta), geom.radius_mm * std::sin(theta), z};
    }
    if (norm(ends[1] - ends[0]) < 1e-9) continue;

    for (std::size_t i = 0; i < n_intervals; ++i) {
      const Vec3 a = transform_apply(inv[i], ends[0]);
      const Vec3 b = transform_apply(inv[i], ends[1]);
      siddon_path(a, b, grid, path);
      if (path.empty()) continue;
      double mu_int;
      if (shared_grid) {
        mu_int = path_integral(path, attenuation.data);
      } else {
        siddon_path(a, b, mu_grid, mu_path);
        mu_int = path_integral(mu_path, attenuation.data);
      }
      const double w = weight[i] * std::exp(-mu_int);
      for (const PathSeg& s : path) S.data[s.voxel] += w * s.length_mm;
    }
  }

  const double scale = 1.0 / static_cast<double>(config.sensitivity_lors);
  for (double& v : S.data) v *= scale;
  if (config.psf_fwhm_mm > 0.0) S = convolve_gaussian(S, config.psf_fwhm_mm);
  return out;
}

/// MOLAR-style list-mode OSEM. Subsets interleave events by index modulo
/// `subsets`. In MC mode each event LOR is mapped into the head frame by
/// the inverse of its interval pose before tracing. The PSF acts as an
/// image-space blur on both the forward projection and the backprojection.
/// Voxels whose per-subset sensitivity falls below epsilon stay at zero.
inline Volume3D osem_listmode(const EventStream& events, const ScannerGeometry& geom,
                              const Volume3D& attenuation, const MotionTrace* trace,
                              const ReconConfig& config, std::uint64_t seed,
                              const SensitivityImage* precomputed_sensitivity = nullptr) {
  validate_recon_config(config);
  if (events.events.empty()) throw std::invalid_argument("osem_listmode: empty event stream");

  SensitivityImage local;
  const SensitivityImage* sens = precomputed_sensitivity;
  if (!sens) {
    local = sensitivity_image(geom, attenuation, trace, config, seed);
    sens = &local;
  }
  if (sens->motion_compensated != (trace != nullptr))
    throw std::invalid_argument("osem_listmode: sensitivity mode does not match reconstruction mode");
  if (sens->image.dims != config.grid_dims)
    throw std::invalid_argument("osem_listmode: sensitivity grid does not match config grid");

  const std::size_t n_events = events.events.size();
  const std::size_t n_vox = sens->image.size();
  const int subsets = config.subsets;

  std::vector<double> s_sub(n_vox);
  for (std::size_t v = 0; v < n_vox; ++v) s_sub[v] = sens->image.data[v] / subsets;

  std::size_t n_support = 0;
  for (std::size_t v = 0; v < n_vox; ++v)
    if (s_sub[v] >= config.epsilon) ++n_support;
  Volume3D lambda = make_centered_volume(config.grid_dims, config.grid_voxel_mm);
  if (n_support == 0) return lambda;
  const double init = static_cast<double>(n_events) / static_cast<double>(n_support);
  for (std::size_t v = 0; v < n_vox; ++v)
    if (s_sub[v] >= config.epsilon) lambda.data[v] = init;

  // Event endpoints in the reconstruction frame (head frame for MC).
  std::vector<Vec3> ea(n_events), eb(n_events);
  if (trace) {
    for (std::size_t i = 0; i < n_events; ++i) {
      const ListModeEvent& e = events.events[i];
      const RigidTransform inv = pose_inverse(pose_at(*trace, e.t_s));
      ea[i] = transform_apply(inv, e.a_mm);
      eb[i] = transform_apply(inv, e.b_mm);
    }
  } else {
    for (std::size_t i = 0; i < n_events; ++i) {
      ea[i] = events.events[i].a_mm;
      eb[i] = events.events[i].b_mm;
    }
  }

  const GridSpec grid = GridSpec::from_volume(lambda);
  const bool use_psf = config.psf_fwhm_mm > 0.0;
  Volume3D acc = make_centered_volume(config.grid_dims, config.grid_voxel_mm);
  std::vector<PathSeg> path;

  for (int it = 0; it < config.iterations; ++it) {
    for (int sub = 0; sub < subsets; ++sub) {
      const Volume3D forward = use_psf ? convolve_gaussian(lambda, config.psf_fwhm_mm) : lambda;
      std::fill(acc.data.begin(), acc.data.end(), 0.0);
      for (std::size_t i = static_cast<std::size_t>(sub); i < n_events;
           i += static_cast<std::size_t>(subsets)) {
        siddon_path(ea[i], eb[i], grid, path);
        if (path.empty()) continue;
        double denom = 0.0;
        for (const PathSeg& s : path) denom += forward.data[s.voxel] * s.length_mm;
        if (denom < config.epsilon) continue;
        const double w = 1.0 / denom;
        for (const PathSeg& s : path) acc.data[s.voxel] += w * s.length_mm;
      }
      if (use_psf) acc = convolve_gaussian(acc, config.psf_fwhm_mm);
      for (std::size_t v = 0; v < n_vox; ++v)
        lambda.data[v] = (s_sub[v] >= config.epsilon) ? lambda.data[v] / s_sub[v] * acc.data[v] : 0.0;
    }
  }
  return lambda;
}

}  // namespace petmc

#endif  // PETMC_RECON_HPP
