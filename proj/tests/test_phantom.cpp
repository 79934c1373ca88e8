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
#include <set>

#include "petmc/phantom.hpp"

using namespace petmc;

namespace {

const std::array<int, 3> kDims{64, 64, 64};
const std::array<double, 3> kVoxel{3.0, 3.0, 3.0};

bool in_region(const Vec3& p, const AdRegion& r) {
  double rho2 = 0.0;
  for (int ax = 0; ax < 3; ++ax) {
    const double d = (p[ax] - r.center_mm[ax]) / r.radii_mm[ax];
    rho2 += d * d;
  }
  return rho2 <= 1.0;
}

}  // namespace

TEST_CASE("phantom params validation") {
  PhantomParams p;
  REQUIRE_NOTHROW(validate_phantom_params(p));
  PhantomParams bad = p;
  bad.gray_white_ratio = 1.0;
  REQUIRE_THROWS_AS(validate_phantom_params(bad), std::invalid_argument);
  bad = p;
  bad.ad_reduction = 1.0;
  REQUIRE_THROWS_AS(validate_phantom_params(bad), std::invalid_argument);
  bad = p;
  bad.ad_reduction = -0.1;
  REQUIRE_THROWS_AS(validate_phantom_params(bad), std::invalid_argument);
  bad = p;
  bad.subject_jitter = -0.01;
  REQUIRE_THROWS_AS(validate_phantom_params(bad), std::invalid_argument);
  bad = p;
  bad.cortex_thickness_mm = 0.0;
  REQUIRE_THROWS_AS(validate_phantom_params(bad), std::invalid_argument);
  bad = p;
  bad.brain_radii_mm = {0.0, 85.0, 65.0};
  REQUIRE_THROWS_AS(validate_phantom_params(bad), std::invalid_argument);
}

TEST_CASE("phantom structure: compartments and attenuation") {
  PhantomParams params;
  params.subject_jitter = 0.0;
  const auto [activity, mu] = make_phantom(params, Label::CN, 1, kDims, kVoxel);

  // white matter voxel near the center
  REQUIRE(activity.at(31, 31, 31) == Catch::Approx(1.0).margin(1e-12));
  // cortex voxel near the +y brain edge (outside the inner ellipsoid)
  REQUIRE(activity.at(31, 58, 31) == Catch::Approx(params.gray_white_ratio).margin(1e-12));
  // outside the head
  REQUIRE(activity.at(0, 0, 0) == 0.0);
  REQUIRE(mu.at(0, 0, 0) == 0.0);
  // attenuation inside the head
  REQUIRE(mu.at(31, 31, 31) == Catch::Approx(0.0096).margin(1e-12));
  REQUIRE(mu.at(31, 58, 31) == Catch::Approx(0.0096).margin(1e-12));

  validate_volume(activity, true);
  validate_volume(mu, true);
}

TEST_CASE("zero reduction makes AD identical to CN") {
  PhantomParams params;
  params.ad_reduction = 0.0;
  const auto [cn, mu_cn] = make_phantom(params, Label::CN, 7, kDims, kVoxel);
  const auto [ad, mu_ad] = make_phantom(params, Label::AD, 7, kDims, kVoxel);
  REQUIRE(cn.data == ad.data);
  REQUIRE(mu_cn.data == mu_ad.data);
}

TEST_CASE("region mean ratio equals one minus the reduction") {
  PhantomParams params;
  params.ad_reduction = 0.2;
  params.subject_jitter = 0.0;
  const auto [cn, mu_cn] = make_phantom(params, Label::CN, 3, kDims, kVoxel);
  const auto [ad, mu_ad] = make_phantom(params, Label::AD, 3, kDims, kVoxel);

  for (const AdRegion& region : params.ad_regions) {
    double sum_cn = 0.0, sum_ad = 0.0;
    int n = 0;
    for (int iz = 0; iz < kDims[2]; ++iz)
      for (int iy = 0; iy < kDims[1]; ++iy)
        for (int ix = 0; ix < kDims[0]; ++ix) {
          if (!in_region(cn.voxel_center(ix, iy, iz), region)) continue;
          sum_cn += cn.at(ix, iy, iz);
          sum_ad += ad.at(ix, iy, iz);
          ++n;
        }
    REQUIRE(n > 0);
    REQUIRE(sum_ad / sum_cn == Catch::Approx(0.8).margin(1e-6));
  }
}

TEST_CASE("same-seed AD and CN differ only inside the regions when jitter is zero") {
  PhantomParams params;
  params.subject_jitter = 0.0;
  const auto [cn, mu_cn] = make_phantom(params, Label::CN, 11, kDims, kVoxel);
  const auto [ad, mu_ad] = make_phantom(params, Label::AD, 11, kDims, kVoxel);

  for (int iz = 0; iz < kDims[2]; ++iz)
    for (int iy = 0; iy < kDims[1]; ++iy)
      for (int ix = 0; ix < kDims[0]; ++ix) {
        const Vec3 c = cn.voxel_center(ix, iy, iz);
        bool inside = false;
        for (const AdRegion& r : params.ad_regions) inside = inside || in_region(c, r);
        if (inside) continue;
        REQUIRE(ad.at(ix, iy, iz) == cn.at(ix, iy, iz));
      }
  // and the AD integral is strictly lower
  REQUIRE(integral(ad) < integral(cn));
}

TEST_CASE("phantom generation is bit-reproducible and seed-sensitive") {
  PhantomParams params;  // default jitter > 0 so the random field is exercised
  const auto [a1, m1] = make_phantom(params, Label::CN, 42, kDims, kVoxel);
  const auto [a2, m2] = make_phantom(params, Label::CN, 42, kDims, kVoxel);
  REQUIRE(a1.data == a2.data);
  REQUIRE(m1.data == m2.data);
  const auto [a3, m3] = make_phantom(params, Label::CN, 43, kDims, kVoxel);
  REQUIRE(a1.data != a3.data);
}

TEST_CASE("jitter perturbs activity multiplicatively") {
  PhantomParams flat;
  flat.subject_jitter = 0.0;
  PhantomParams jit;
  jit.subject_jitter = 0.05;
  const auto [base, mb] = make_phantom(flat, Label::CN, 5, kDims, kVoxel);
  const auto [wob, mw] = make_phantom(jit, Label::CN, 5, kDims, kVoxel);
  int changed = 0, total = 0;
  for (std::size_t i = 0; i < base.data.size(); ++i) {
    if (base.data[i] == 0.0) {
      REQUIRE(wob.data[i] == 0.0);
      continue;
    }
    ++total;
    const double ratio = wob.data[i] / base.data[i];
    REQUIRE(ratio > 0.0);
    REQUIRE(ratio < 2.0);
    if (ratio != 1.0) ++changed;
  }
  REQUIRE(changed > total / 2);
}

TEST_CASE("regions outside the grid are rejected") {
  PhantomParams params;
  params.ad_regions[0].center_mm = {200.0, 0.0, 0.0};
  REQUIRE_THROWS_AS(make_phantom(params, Label::AD, 1, kDims, kVoxel), std::invalid_argument);

  PhantomParams big;
  big.brain_radii_mm = {120.0, 85.0, 65.0};  // exceeds the 96 mm half-extent
  REQUIRE_THROWS_AS(make_phantom(big, Label::CN, 1, kDims, kVoxel), std::invalid_argument);
}

TEST_CASE("cohort sizes mirror the study tables") {
  // full-scale synaptic-density cohort: 47+52 train, 2+7 val, 10+10 test
  const CohortCounts ucbj{47, 52, 2, 7, 10, 10};
  const auto full = make_cohort(ucbj, 5.58, 0.0, 99);
  REQUIRE(full.size() == 128);

  // desk-scale default
  const CohortCounts desk{20, 20, 4, 4, 10, 10};
  const auto records = make_cohort(desk, 7.0, 2.5, 123);
  REQUIRE(records.size() == 68);

  int train_cn = 0, test_ad = 0;
  std::set<std::string> ids;
  std::set<std::uint64_t> seeds;
  for (const SubjectRecord& r : records) {
    ids.insert(r.id);
    seeds.insert(r.seed);
    if (r.split == Split::train && r.label == Label::CN) ++train_cn;
    if (r.split == Split::test && r.label == Label::AD) ++test_ad;
    REQUIRE(r.motion_target_mm >= 0.0);
  }
  REQUIRE(train_cn == 20);
  REQUIRE(test_ad == 10);
  REQUIRE(ids.size() == 68);    // unique ids
  REQUIRE(seeds.size() == 68);  // distinct per-subject seeds
}

TEST_CASE("cohort determinism and stratified motion targets") {
  const CohortCounts desk{20, 20, 4, 4, 10, 10};
  const auto a = make_cohort(desk, 7.0, 2.5, 7);
  const auto b = make_cohort(desk, 7.0, 2.5, 7);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].id == b[i].id);
    REQUIRE(a[i].seed == b[i].seed);
    REQUIRE(a[i].motion_target_mm == b[i].motion_target_mm);
  }

  // per-cell stratified normal quantiles have the configured mean exactly
  double test_mean = 0.0;
  int test_n = 0;
  for (const SubjectRecord& r : a) {
    if (r.split != Split::test) continue;
    test_mean += r.motion_target_mm;
    ++test_n;
  }
  test_mean /= test_n;
  REQUIRE(test_n == 20);
  REQUIRE(test_mean == Catch::Approx(7.0).margin(1e-9));

  // zero std collapses every target to the mean
  const auto flat = make_cohort(desk, 5.0, 0.0, 7);
  for (const SubjectRecord& r : flat) REQUIRE(r.motion_target_mm == 5.0);
}
