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

#ifndef PETMC_PHANTOM_HPP
#define PETMC_PHANTOM_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "petmc/geom.hpp"
#include "petmc/motion.hpp"
#include "petmc/rng.hpp"
#include "petmc/volume.hpp"

namespace petmc {

enum class Label { CN, AD };

inline std::string to_string(Label l) { return l == Label::CN ? "CN" : "AD"; }

inline Label label_from_string(const std::string& s) {
  if (s == "CN") return Label::CN;
  if (s == "AD") return Label::AD;
  throw std::invalid_argument("unknown label: " + s);
}

struct AdRegion {
  Vec3 center_mm;
  Vec3 radii_mm;
};

struct PhantomParams {
  Vec3 brain_radii_mm{70.0, 85.0, 65.0};
  double cortex_thickness_mm = 12.0;
  double gray_white_ratio = 4.0;
  std::vector<AdRegion> ad_regions{{{52.0, -30.0, -26.0}, {16.0, 22.0, 20.0}},
                                   {{-52.0, -30.0, -26.0}, {16.0, 22.0, 20.0}}};
  double ad_reduction = 0.2;
  double subject_jitter = 0.05;
  double mu_tissue_per_mm = 0.0096;
};

inline void validate_phantom_params(const PhantomParams& p) {
  for (int ax = 0; ax < 3; ++ax)
    if (!(p.brain_radii_mm[ax] > 0.0)) throw std::invalid_argument("phantom: brain radii must be positive");
  if (!(p.gray_white_ratio > 1.0)) throw std::invalid_argument("phantom: gray/white ratio must be > 1");
  if (!(p.cortex_thickness_mm > 0.0) ||
      p.cortex_thickness_mm >= std::min({p.brain_radii_mm[0], p.brain_radii_mm[1], p.brain_radii_mm[2]}))
    throw std::invalid_argument("phantom: cortex thickness must be in (0, min radius)");
  if (!(p.ad_reduction >= 0.0 && p.ad_reduction < 1.0))
    throw std::invalid_argument("phantom: ad_reduction must be in [0,1)");
  if (p.subject_jitter < 0.0) throw std::invalid_argument("phantom: jitter must be >= 0");
  if (p.mu_tissue_per_mm < 0.0) throw std::invalid_argument("phantom: mu must be >= 0");
  for (const AdRegion& r : p.ad_regions)
    for (int ax = 0; ax < 3; ++ax)
      if (!(r.radii_mm[ax] > 0.0)) throw std::invalid_argument("phantom: ad region radii must be positive");
}

namespace detail {

inline double ellipsoid_rho2(const Vec3& x, const Vec3& center, const Vec3& radii) {
  double acc = 0.0;
  for (int ax = 0; ax < 3; ++ax) {
    const double u = (x[ax] - center[ax]) / radii[ax];
    acc += u * u;
  }
  return acc;
}

/// Smooth zero-mean random field as a small sum of cosine waves with
/// wavelengths of a few centimeters, normalized to unit expected variance.
struct SmoothField {
  static constexpr int kWaves = 6;
  std::array<Vec3, kWaves> wavevec;
  std::array<double, kWaves> phase;
  std::array<double, kWaves> amp;
  double inv_rms = 0.0;

  explicit SmoothField(Rng& rng) {
    double sum2 = 0.0;
    for (int k = 0; k < kWaves; ++k) {
      const double wavelength = rng.uniform(40.0, 120.0);
      wavevec[static_cast<std::size_t>(k)] = (2.0 * M_PI / wavelength) * rng.unit_vector();
      phase[static_cast<std::size_t>(k)] = rng.uniform(0.0, 2.0 * M_PI);
      amp[static_cast<std::size_t>(k)] = rng.normal();
      sum2 += amp[static_cast<std::size_t>(k)] * amp[static_cast<std::size_t>(k)];
    }
    inv_rms = (sum2 > 0.0) ? 1.0 / std::sqrt(0.5 * sum2) : 0.0;
  }

  double operator()(const Vec3& x) const {
    double g = 0.0;
    for (int k = 0; k < kWaves; ++k)
      g += amp[static_cast<std::size_t>(k)] *
           std::cos(dot(wavevec[static_cast<std::size_t>(k)], x) + phase[static_cast<std::size_t>(k)]);
    return g * inv_rms;
  }
};

}  // namespace detail

/// Two-compartment ellipsoidal brain (cortical gray shell over white core)
/// with an optional smooth per-subject jitter field; AD phantoms get a
/// multiplicative uptake deficit inside the configured regions. Returns
/// (activity, attenuation) on a grid centered at the world origin.
inline std::pair<Volume3D, Volume3D> make_phantom(const PhantomParams& params, Label label,
                                                  std::uint64_t seed, const std::array<int, 3>& dims,
                                                  const Vec3& voxel_mm) {
  validate_phantom_params(params);
  Volume3D activity = make_centered_volume(dims, voxel_mm);
  Volume3D attenuation = make_centered_volume(dims, voxel_mm);

  for (int ax = 0; ax < 3; ++ax) {
    const double half_extent = 0.5 * dims[ax] * voxel_mm[ax];
    if (params.brain_radii_mm[ax] > half_extent)
      throw std::invalid_argument("phantom: brain ellipsoid does not fit inside the grid");
    for (const AdRegion& r : params.ad_regions)
      if (std::abs(r.center_mm[ax]) + r.radii_mm[ax] > half_extent)
        throw std::invalid_argument("phantom: ad region does not fit inside the grid");
  }

  Rng rng(seed);
  const detail::SmoothField field(rng);

  Vec3 white_radii;
  for (int ax = 0; ax < 3; ++ax) white_radii[ax] = params.brain_radii_mm[ax] - params.cortex_thickness_mm;
  const Vec3 zero{0.0, 0.0, 0.0};

  for (int iz = 0; iz < dims[2]; ++iz)
    for (int iy = 0; iy < dims[1]; ++iy)
      for (int ix = 0; ix < dims[0]; ++ix) {
        const Vec3 x = activity.voxel_center(ix, iy, iz);
        const std::size_t v = activity.index(ix, iy, iz);
        if (detail::ellipsoid_rho2(x, zero, params.brain_radii_mm) > 1.0) continue;
        attenuation.data[v] = params.mu_tissue_per_mm;
        double a = (detail::ellipsoid_rho2(x, zero, white_radii) <= 1.0) ? 1.0 : params.gray_white_ratio;
        if (label == Label::AD)
          for (const AdRegion& r : params.ad_regions)
            if (detail::ellipsoid_rho2(x, r.center_mm, r.radii_mm) <= 1.0) a *= 1.0 - params.ad_reduction;
        if (params.subject_jitter > 0.0) a *= std::max(1.0 + params.subject_jitter * field(x), 0.05);
        activity.data[v] = a;
      }
  return {std::move(activity), std::move(attenuation)};
}

enum class Split { train, val, test };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

struct CohortCounts {
  int train_cn = 20, train_ad = 20;
  int val_cn = 4, val_ad = 4;
  int test_cn = 10, test_ad = 10;

  int total() const { return train_cn + train_ad + val_cn + val_ad + test_cn + test_ad; }
};

struct SubjectRecord {
  std::string id;
  Split split = Split::train;
  Label label = Label::CN;
  std::uint64_t seed = 0;
  double motion_target_mm = 0.0;
};

/// Deterministic cohort: per (split, label) cell the motion targets are the
/// stratified quantiles of N(mean, std), so each cell's sample mean equals
/// the configured mean exactly. Targets are clamped at 0.
inline std::vector<SubjectRecord> make_cohort(const CohortCounts& counts, double motion_mean_mm,
                                              double motion_std_mm, std::uint64_t master_seed) {
  if (counts.train_cn < 0 || counts.train_ad < 0 || counts.val_cn < 0 || counts.val_ad < 0 ||
      counts.test_cn < 0 || counts.test_ad < 0)
    throw std::invalid_argument("make_cohort: counts must be >= 0");
  if (motion_mean_mm < 0.0 || motion_std_mm < 0.0)
    throw std::invalid_argument("make_cohort: motion distribution parameters must be >= 0");

  std::vector<SubjectRecord> records;
  records.reserve(static_cast<std::size_t>(counts.total()));
  std::uint64_t index = 0;
  const auto add_cell = [&](Split split, Label label, int n) {
    for (int i = 0; i < n; ++i) {
      SubjectRecord rec;
      char buf[16];
      std::snprintf(buf, sizeof buf, "%02d", i);
      rec.id = to_string(split) + "_" + (label == Label::CN ? "cn" : "ad") + "_" + buf;
      rec.split = split;
      rec.label = label;
      rec.seed = derive_seed(master_seed, index + 1, 0x5B);
      double target = motion_mean_mm;
      if (motion_std_mm > 0.0 && n > 0) {
        const double p = (i + 0.5) / n;
        target = motion_mean_mm + motion_std_mm * inverse_normal_cdf(p);
      }
      rec.motion_target_mm = std::max(target, 0.0);
      records.push_back(std::move(rec));
      ++index;
    }
  };
  add_cell(Split::train, Label::CN, counts.train_cn);
  add_cell(Split::train, Label::AD, counts.train_ad);
  add_cell(Split::val, Label::CN, counts.val_cn);
  add_cell(Split::val, Label::AD, counts.val_ad);
  add_cell(Split::test, Label::CN, counts.test_cn);
  add_cell(Split::test, Label::AD, counts.test_ad);
  return records;
}

}  // namespace petmc

#endif  // PETMC_PHANTOM_HPP
