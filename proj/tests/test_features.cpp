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
#include <vector>

#include "petmc/features.hpp"
#include "petmc/rng.hpp"
#include "petmc/volume.hpp"

using namespace petmc;

namespace {

// brain-like cube: zero background, positive blob values in a central ball
Volume3D blob_volume(int dim, std::uint64_t seed) {
  Volume3D v = make_centered_volume({dim, dim, dim}, {3.0, 3.0, 3.0});
  Rng rng(seed);
  const double r = dim / 3.0;
  for (int z = 0; z < dim; ++z)
    for (int y = 0; y < dim; ++y)
      for (int x = 0; x < dim; ++x) {
        const double dx = x - (dim - 1) / 2.0, dy = y - (dim - 1) / 2.0, dz = z - (dim - 1) / 2.0;
        if (dx * dx + dy * dy + dz * dz < r * r) v.at(x, y, z) = rng.uniform(0.1, 5.0);
      }
  return v;
}

FeatureMap random_map(int channels, int dim, std::uint64_t seed) {
  FeatureMap m;
  m.channels = channels;
  m.dim = dim;
  m.data.resize(static_cast<std::size_t>(channels) * dim * dim * dim);
  Rng rng(seed);
  for (float& x : m.data) x = static_cast<float>(rng.normal());
  return m;
}

// naive zero-padded 3x3x3 convolution matching the library's tap order
float conv_ref(const FeatureMap& in, const std::vector<float>& w, int oc, int in_ch, int stride,
               int oz, int oy, int ox) {
  double acc = 0.0;
  for (int ic = 0; ic < in_ch; ++ic)
    for (int kz = 0; kz < 3; ++kz)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const int iz = oz * stride + kz - 1, iy = oy * stride + ky - 1, ix = ox * stride + kx - 1;
          if (iz < 0 || iy < 0 || ix < 0 || iz >= in.dim || iy >= in.dim || ix >= in.dim) continue;
          acc += static_cast<double>(w[(static_cast<std::size_t>(oc) * in_ch + ic) * 27 +
                                       (kz * 3 + ky) * 3 + kx]) *
                 in.at(ic, iz, iy, ix);
        }
  return static_cast<float>(acc);
}

}  // namespace

TEST_CASE("encoder config validation") {
  EncoderConfig c;
  REQUIRE_NOTHROW(validate_encoder_config(c));
  c.stage_channels = {32, 64, 128, 256};
  REQUIRE_THROWS_AS(validate_encoder_config(c), std::invalid_argument);
  c = EncoderConfig{};
  c.input_dim = 48;
  REQUIRE_THROWS_AS(validate_encoder_config(c), std::invalid_argument);
  c.input_dim = 0;
  REQUIRE_THROWS_AS(validate_encoder_config(c), std::invalid_argument);
  c = EncoderConfig{};
  c.norm_epsilon = 0.0;
  REQUIRE_THROWS_AS(validate_encoder_config(c), std::invalid_argument);
}

TEST_CASE("support standardization zero-means and unit-scales the brain") {
  Rng rng(4);
  std::vector<double> v(5000, 0.0);
  std::size_t n_s = 0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (rng.uniform() < 0.4) {
      v[i] = rng.uniform(0.1, 5.0);
      ++n_s;
    }
  const auto z = detail::standardize_support(v);

  // support statistics drive one global affine map: the support z-scores to
  // mean 0 variance 1, the background collapses onto a single constant
  double sum = 0.0, sum2 = 0.0;
  float background = 0.0f;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == 0.0) {
      if (background == 0.0f) background = z[i];
      REQUIRE(z[i] == background);
      continue;
    }
    sum += z[i];
    sum2 += static_cast<double>(z[i]) * z[i];
  }
  REQUIRE(background < 0.0f);
  REQUIRE_THAT(sum / static_cast<double>(n_s), Catch::Matchers::WithinAbs(0.0, 1e-6));
  REQUIRE_THAT(sum2 / static_cast<double>(n_s), Catch::Matchers::WithinRel(1.0, 1e-5));
}

TEST_CASE("support standardization cancels affine intensity changes bitwise") {
  const Volume3D v = blob_volume(32, 12);
  std::vector<double> scaled(v.data.size());
  for (std::size_t i = 0; i < v.data.size(); ++i) scaled[i] = 2.0 * v.data[i] + 1.0;
  const auto z0 = detail::standardize_support(v.data);
  const auto z1 = detail::standardize_support(scaled);
  REQUIRE(z0 == z1);
}

TEST_CASE("degenerate inputs standardize to zero") {
  REQUIRE(detail::standardize_support({}).empty());
  // constant volume: empty support
  const std::vector<double> flat(64, 3.3);
  for (const float z : detail::standardize_support(flat)) REQUIRE(z == 0.0f);
  // single distinct value above the minimum: r2 == 0
  std::vector<double> two(64, 1.0);
  two[10] = 2.0;
  for (const float z : detail::standardize_support(two)) REQUIRE(z == 0.0f);
}

TEST_CASE("conv3d matches a naive reference at stride 1 and 2") {
  const FeatureMap in = random_map(2, 6, 99);
  const auto w = detail::draw_weights(31415, 3, 2);
  for (const int stride : {1, 2}) {
    const FeatureMap out = detail::conv3d(in, w, 3, stride);
    const int od = (6 + 2 - 3) / stride + 1;
    REQUIRE(out.channels == 3);
    REQUIRE(out.dim == od);
    for (int oc = 0; oc < 3; ++oc)
      for (int oz = 0; oz < od; ++oz)
        for (int oy = 0; oy < od; ++oy)
          for (int ox = 0; ox < od; ++ox) {
            const float ref = conv_ref(in, w, oc, 2, stride, oz, oy, ox);
            REQUIRE_THAT(out.at(oc, oz, oy, ox), Catch::Matchers::WithinAbs(ref, 1e-5));
          }
  }
}

TEST_CASE("conv3d is shift-equivariant away from borders") {
  const FeatureMap in = random_map(1, 8, 5);
  FeatureMap shifted = in;
  for (int z = 0; z < 8; ++z)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x)
        shifted.data[(static_cast<std::size_t>(z) * 8 + y) * 8 + x] =
            (x == 0) ? 0.0f : in.at(0, z, y, x - 1);
  const auto w = detail::draw_weights(7, 2, 1);
  const FeatureMap a = detail::conv3d(in, w, 2, 1);
  const FeatureMap b = detail::conv3d(shifted, w, 2, 1);
  for (int c = 0; c < 2; ++c)
    for (int z = 1; z < 7; ++z)
      for (int y = 1; y < 7; ++y)
        for (int x = 2; x < 7; ++x)
          REQUIRE_THAT(b.at(c, z, y, x), Catch::Matchers::WithinAbs(a.at(c, z, y, x - 1), 1e-6));
}

TEST_CASE("channel normalization hits zero mean unit variance") {
  FeatureMap m = random_map(5, 12, 1234);
  // one degenerate constant channel
  for (std::size_t i = 0; i < m.plane(); ++i) m.data[4 * m.plane() + i] = 2.5f;
  detail::normalize_channels(m, 1e-5);

  const double plane = static_cast<double>(m.plane());
  for (int c = 0; c < 4; ++c) {
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < m.plane(); ++i) {
      const double x = m.data[static_cast<std::size_t>(c) * m.plane() + i];
      sum += x;
      sum2 += x * x;
    }
    const double mean = sum / plane;
    REQUIRE_THAT(mean, Catch::Matchers::WithinAbs(0.0, 1e-6));
    REQUIRE_THAT(sum2 / plane - mean * mean, Catch::Matchers::WithinAbs(1.0, 1e-4));
  }
  for (std::size_t i = 0; i < m.plane(); ++i) REQUIRE(m.data[4 * m.plane() + i] == 0.0f);
}

TEST_CASE("maxpool2 and global maxpool match brute force") {
  const FeatureMap m = random_map(3, 6, 321);
  const FeatureMap p = detail::maxpool2(m);
  REQUIRE(p.dim == 3);
  REQUIRE(p.channels == 3);
  for (int c = 0; c < 3; ++c)
    for (int z = 0; z < 3; ++z)
      for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) {
          float best = -1e30f;
          for (int dz = 0; dz < 2; ++dz)
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx)
                best = std::max(best, m.at(c, 2 * z + dz, 2 * y + dy, 2 * x + dx));
          REQUIRE(p.at(c, z, y, x) == best);
        }

  const auto g = reduce_maxpool(m);
  REQUIRE(g.size() == 3);
  for (int c = 0; c < 3; ++c) {
    float best = m.data[static_cast<std::size_t>(c) * m.plane()];
    for (std::size_t i = 0; i < m.plane(); ++i)
      best = std::max(best, m.data[static_cast<std::size_t>(c) * m.plane() + i]);
    REQUIRE(g[static_cast<std::size_t>(c)] == static_cast<double>(best));
  }
  REQUIRE_THROWS_AS(reduce_maxpool(FeatureMap{}), std::invalid_argument);
}

TEST_CASE("downsample skip subsamples kept channels and zero-fills new ones") {
  const FeatureMap m = random_map(2, 6, 888);
  const FeatureMap s = detail::downsample_skip(m, 4, 2);
  REQUIRE(s.channels == 4);
  REQUIRE(s.dim == 3);
  for (int c = 0; c < 2; ++c)
    for (int z = 0; z < 3; ++z)
      for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x)
          REQUIRE(s.at(c, z, y, x) == m.at(c, 2 * z, 2 * y, 2 * x));
  for (int c = 2; c < 4; ++c)
    for (std::size_t i = 0; i < s.plane(); ++i)
      REQUIRE(s.data[static_cast<std::size_t>(c) * s.plane() + i] == 0.0f);
}

TEST_CASE("encoder stage geometry follows the channel and size ladder") {
  const Volume3D v = blob_volume(64, 2024);
  const auto stages = encode(v, EncoderConfig{});
  const std::array<int, 4> channels{64, 128, 256, 512};
  const std::array<int, 4> dims{16, 8, 4, 2};
  for (int s = 0; s < 4; ++s) {
    REQUIRE(stages[static_cast<std::size_t>(s)].channels == channels[static_cast<std::size_t>(s)]);
    REQUIRE(stages[static_cast<std::size_t>(s)].dim == dims[static_cast<std::size_t>(s)]);
    for (const float x : stages[static_cast<std::size_t>(s)].data) {
      REQUIRE(std::isfinite(x));
      REQUIRE(x >= 0.0f);  // final relu
    }
    const auto f = reduce_maxpool(stages[static_cast<std::size_t>(s)]);
    REQUIRE(f.size() == static_cast<std::size_t>(channels[static_cast<std::size_t>(s)]));
    double total = 0.0;
    for (const double x : f) total += x;
    REQUIRE(total > 0.0);
  }

  // smallest legal cube keeps the one-voxel-per-halving law
  EncoderConfig c32;
  c32.input_dim = 32;
  const auto small = encode(blob_volume(32, 7), c32);
  for (int s = 0; s < 4; ++s)
    REQUIRE(small[static_cast<std::size_t>(s)].dim == 8 >> s);
}

TEST_CASE("encoder is deterministic in the seed and sensitive to it") {
  const Volume3D v = blob_volume(64, 31);
  const auto a = encode(v, EncoderConfig{});
  const auto b = encode(v, EncoderConfig{});
  EncoderConfig other;
  other.seed = 424243;
  const auto c = encode(v, other);
  for (int s = 0; s < 4; ++s) {
    REQUIRE(a[static_cast<std::size_t>(s)].data == b[static_cast<std::size_t>(s)].data);
    REQUIRE(a[static_cast<std::size_t>(s)].data != c[static_cast<std::size_t>(s)].data);
  }
}

TEST_CASE("encoder features are invariant to affine intensity changes") {
  const Volume3D v = blob_volume(64, 55);
  Volume3D w = v;
  for (double& x : w.data) x = 0.5 * x + 2.0;
  const auto a = encode(v, EncoderConfig{});
  const auto b = encode(w, EncoderConfig{});
  for (int s = 0; s < 4; ++s)
    REQUIRE(a[static_cast<std::size_t>(s)].data == b[static_cast<std::size_t>(s)].data);
}

TEST_CASE("encoder handles a constant volume without numerical blowups") {
  Volume3D v = make_centered_volume({64, 64, 64}, {3.0, 3.0, 3.0});
  const auto stages = encode(v, EncoderConfig{});
  for (int s = 0; s < 4; ++s)
    for (const float x : stages[static_cast<std::size_t>(s)].data) {
      REQUIRE(std::isfinite(x));
      REQUIRE(x == 0.0f);
    }
}

TEST_CASE("encoder input validation") {
  const EncoderConfig c;
  REQUIRE_THROWS_AS(encode(blob_volume(32, 1), c), std::invalid_argument);
  Volume3D bad = blob_volume(64, 1);
  bad.data[100] = std::nan("");
  REQUIRE_THROWS_AS(encode(bad, c), std::invalid_argument);
}
