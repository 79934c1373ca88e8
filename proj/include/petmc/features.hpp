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

#ifndef PETMC_FEATURES_HPP
#define PETMC_FEATURES_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "petmc/rng.hpp"
#include "petmc/volume.hpp"

namespace petmc {

struct EncoderConfig {
  std::uint64_t seed = 424242;
  std::array<int, 4> stage_channels{64, 128, 256, 512};
  int input_dim = 64;
  double norm_epsilon = 1e-5;
};

inline void validate_encoder_config(const EncoderConfig& c) {
  if (c.stage_channels != std::array<int, 4>{64, 128, 256, 512})
    throw std::invalid_argument("encoder: stage channels are fixed to 64/128/256/512");
  if (c.input_dim < 32 || c.input_dim % 32 != 0)
    throw std::invalid_argument("encoder: input_dim must be a positive multiple of 32");
  if (!(c.norm_epsilon > 0.0)) throw std::invalid_argument("encoder: norm_epsilon must be positive");
}

/// Channel-major cubic feature map: data[(c*dim + z)*dim*dim + y*dim + x].
struct FeatureMap {
  int channels = 0;
  int dim = 0;
  std::vector<float> data;

  std::size_t plane() const { return static_cast<std::size_t>(dim) * dim * dim; }
  float at(int c, int z, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * dim + z) * dim * dim +
                static_cast<std::size_t>(y) * dim + x];
  }
};

namespace detail {

/// Standardization over the brain support (values strictly above the volume
/// minimum), evaluated in quadruple precision so that exactly representable
/// affine intensity changes of the input cancel bitwise:
///   N_i = n_s v_i - sum(v), R^2 = sum over support of N_j^2,
///   z_i = sign(N_i) sqrt(n_s N_i^2 / R^2).
inline std::vector<float> standardize_support(const std::vector<double>& v) {
  std::vector<float> z(v.size(), 0.0f);
  if (v.empty()) return z;
  const double vmin = *std::min_element(v.begin(), v.end());
  __float128 sum = 0;
  std::uint64_t n_s = 0;
  for (const double x : v)
    if (x > vmin) {
      sum += static_cast<__float128>(x);
      ++n_s;
    }
  if (n_s == 0) return z;
  const __float128 ns_q = static_cast<__float128>(n_s);
  __float128 r2 = 0;
  for (const double x : v)
    if (x > vmin) {
      const __float128 n = ns_q * static_cast<__float128>(x) - sum;
      r2 += n * n;
    }
  if (r2 == 0) return z;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const __float128 n = ns_q * static_cast<__float128>(v[i]) - sum;
    const double q = static_cast<double>(n * n * ns_q / r2);
    z[i] = static_cast<float>(n < 0 ? -std::sqrt(q) : std::sqrt(q));
  }
  return z;
}

/// 3x3x3 convolution, zero padding 1, given stride; float weights laid out
/// [out][in][kz][ky][kx], accumulation in double.
inline FeatureMap conv3d(const FeatureMap& in, const std::vector<float>& w, int out_ch, int stride) {
  const int d = in.dim;
  const int od = (d + 2 - 3) / stride + 1;
  FeatureMap out;
  out.channels = out_ch;
  out.dim = od;
  out.data.assign(static_cast<std::size_t>(out_ch) * od * od * od, 0.0f);
  std::vector<double> acc(static_cast<std::size_t>(od) * od * od);
  const std::size_t in_plane = in.plane();

  for (int oc = 0; oc < out_ch; ++oc) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int ic = 0; ic < in.channels; ++ic) {
      const float* in_base = in.data.data() + static_cast<std::size_t>(ic) * in_plane;
      const float* w_base =
          w.data() + (static_cast<std::size_t>(oc) * in.channels + ic) * 27;
      for (int kz = 0; kz < 3; ++kz)
        for (int ky = 0; ky < 3; ++ky)
          for (int kx = 0; kx < 3; ++kx) {
            const double wv = w_base[(kz * 3 + ky) * 3 + kx];
            int oz_lo = 0, oz_hi = od - 1, oy_lo = 0, oy_hi = od - 1, ox_lo = 0, ox_hi = od - 1;
            while (oz_lo * stride + kz - 1 < 0) ++oz_lo;
            while (oz_hi * stride + kz - 1 >= d) --oz_hi;
            while (oy_lo * stride + ky - 1 < 0) ++oy_lo;
            while (oy_hi * stride + ky - 1 >= d) --oy_hi;
            while (ox_lo * stride + kx - 1 < 0) ++ox_lo;
            while (ox_hi * stride + kx - 1 >= d) --ox_hi;
            for (int oz = oz_lo; oz <= oz_hi; ++oz) {
              const int iz = oz * stride + kz - 1;
              for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                const int iy = oy * stride + ky - 1;
                const float* irow = in_base + (static_cast<std::size_t>(iz) * d + iy) * d + (kx - 1);
                double* arow = acc.data() + (static_cast<std::size_t>(oz) * od + oy) * od;
                for (int ox = ox_lo; ox <= ox_hi; ++ox)
                  arow[ox] += wv * irow[static_cast<std::size_t>(ox) * stride];
              }
            }
          }
    }
    float* orow = out.data.data() + static_cast<std::size_t>(oc) * out.plane();
    for (std::size_t i = 0; i < acc.size(); ++i) orow[i] = static_cast<float>(acc[i]);
  }
  return out;
}

/// Per-channel mean/variance normalization over the spatial extent.
inline void normalize_channels(FeatureMap& m, double epsilon) {
  const std::size_t plane = m.plane();
  for (int c = 0; c < m.channels; ++c) {
    float* p = m.data.data() + static_cast<std::size_t>(c) * plane;
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      sum += p[i];
      sum2 += static_cast<double>(p[i]) * p[i];
    }
    const double mean = sum / static_cast<double>(plane);
    const double var = std::max(sum2 / static_cast<double>(plane) - mean * mean, 0.0);
    const double inv = 1.0 / std::sqrt(std::max(var, epsilon));
    for (std::size_t i = 0; i < plane; ++i) p[i] = static_cast<float>((p[i] - mean) * inv);
  }
}

inline void relu(FeatureMap& m) {
  for (float& x : m.data) x = std::max(x, 0.0f);
}

inline FeatureMap maxpool2(const FeatureMap& in) {
  const int d = in.dim / 2;
  FeatureMap out;
  out.channels = in.channels;
  out.dim = d;
  out.data.resize(static_cast<std::size_t>(in.channels) * d * d * d);
  std::size_t o = 0;
  for (int c = 0; c < in.channels; ++c)
    for (int z = 0; z < d; ++z)
      for (int y = 0; y < d; ++y)
        for (int x = 0; x < d; ++x) {
          float best = in.at(c, 2 * z, 2 * y, 2 * x);
          for (int dz = 0; dz < 2; ++dz)
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx)
                best = std::max(best, in.at(c, 2 * z + dz, 2 * y + dy, 2 * x + dx));
          out.data[o++] = best;
        }
  return out;
}

/// Parameter-free shortcut: spatial stride-2 subsample plus zero padding of
/// the new channels.
inline FeatureMap downsample_skip(const FeatureMap& in, int out_ch, int stride) {
  const int d = (stride == 1) ? in.dim : (in.dim + 2 - 3) / stride + 1;
  FeatureMap out;
  out.channels = out_ch;
  out.dim = d;
  out.data.assign(static_cast<std::size_t>(out_ch) * d * d * d, 0.0f);
  for (int c = 0; c < std::min(in.channels, out_ch); ++c)
    for (int z = 0; z < d; ++z)
      for (int y = 0; y < d; ++y)
        for (int x = 0; x < d; ++x)
          out.data[(static_cast<std::size_t>(c) * d + z) * d * d + static_cast<std::size_t>(y) * d + x] =
              in.at(c, z * stride, y * stride, x * stride);
  return out;
}

inline std::vector<float> draw_weights(std::uint64_t seed, int out_ch, int in_ch) {
  const std::size_t n = static_cast<std::size_t>(out_ch) * in_ch * 27;
  const double limit = std::sqrt(6.0 / (static_cast<double>(in_ch) * 27.0));
  Rng rng(seed);
  std::vector<float> w(n);
  for (float& x : w) x = static_cast<float>(rng.uniform(-limit, limit));
  return w;
}

}  // namespace detail

/// Seeded random residual encoder. Stem: stride-2 conv to 64 channels plus
/// 2x2x2 max pooling; then four residual stages on the 64/128/256/512
/// channel ladder (two 3x3x3 convs each, stage entry stride 2 except stage
/// 1). Returns the four post-stage feature maps; for input side D their
/// spatial sides are D/4, D/8, D/16, D/32.
inline std::array<FeatureMap, 4> encode(const Volume3D& vol, const EncoderConfig& config) {
  validate_encoder_config(config);
  const int d = config.input_dim;
  if (vol.dims != std::array<int, 3>{d, d, d})
    throw std::invalid_argument("encode: input volume does not match configured cube");
  validate_volume(vol);

  FeatureMap x;
  x.channels = 1;
  x.dim = d;
  x.data = detail::standardize_support(vol.data);

  // Stem.
  x = detail::conv3d(x, detail::draw_weights(derive_seed(config.seed, 0, 0xFE), 64, 1), 64, 2);
  detail::normalize_channels(x, config.norm_epsilon);
  detail::relu(x);
  x = detail::maxpool2(x);

  std::array<FeatureMap, 4> stages;
  int in_ch = 64;
  for (int s = 0; s < 4; ++s) {
    const int out_ch = config.stage_channels[static_cast<std::size_t>(s)];
    const int stride = (s == 0) ? 1 : 2;
    FeatureMap skip = (stride == 1 && in_ch == out_ch)
                          ? x
                          : detail::downsample_skip(x, out_ch, stride);
    FeatureMap y = detail::conv3d(
        x, detail::draw_weights(derive_seed(config.seed, static_cast<std::uint64_t>(2 * s + 1), 0xFE),
                                out_ch, in_ch),
        out_ch, stride);
    detail::normalize_channels(y, config.norm_epsilon);
    detail::relu(y);
    y = detail::conv3d(
        y, detail::draw_weights(derive_seed(config.seed, static_cast<std::uint64_t>(2 * s + 2), 0xFE),
                                out_ch, out_ch),
        out_ch, 1);
    detail::normalize_channels(y, config.norm_epsilon);
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += skip.data[i];
    detail::relu(y);
    stages[static_cast<std::size_t>(s)] = y;
    x = std::move(y);
    in_ch = out_ch;
  }
  return stages;
}

/// Global per-channel spatial maximum.
inline std::vector<double> reduce_maxpool(const FeatureMap& map) {
  if (map.channels <= 0 || map.data.empty()) throw std::invalid_argument("reduce_maxpool: empty map");
  std::vector<double> out(static_cast<std::size_t>(map.channels));
  const std::size_t plane = map.plane();
  for (int c = 0; c < map.channels; ++c) {
    const float* p = map.data.data() + static_cast<std::size_t>(c) * plane;
    float best = p[0];
    for (std::size_t i = 1; i < plane; ++i) best = std::max(best, p[i]);
    out[static_cast<std::size_t>(c)] = best;
  }
  return out;
}

}  // namespace petmc

#endif  // PETMC_FEATURES_HPP
