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

#ifndef PETMC_VOLUME_HPP
#define PETMC_VOLUME_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "petmc/geom.hpp"

namespace petmc {

/// Regular 3D scalar grid with physical voxel size.
///
/// `origin_mm` is the world position of the center of voxel (0,0,0); data is
/// stored x-fastest. Values are held in double precision; the on-disk PVOL
/// format stores float32.
struct Volume3D {
  std::array<int, 3> dims{0, 0, 0};
  std::array<double, 3> voxel_mm{1.0, 1.0, 1.0};
  std::array<double, 3> origin_mm{0.0, 0.0, 0.0};
  std::vector<double> data;

  std::size_t size() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }
  std::size_t index(int ix, int iy, int iz) const {
    return (static_cast<std::size_t>(iz) * dims[1] + iy) * dims[0] + ix;
  }
  double& at(int ix, int iy, int iz) { return data[index(ix, iy, iz)]; }
  double at(int ix, int iy, int iz) const { return data[index(ix, iy, iz)]; }

  /// World position of the center of voxel (ix,iy,iz).
  Vec3 voxel_center(int ix, int iy, int iz) const {
    return {origin_mm[0] + ix * voxel_mm[0], origin_mm[1] + iy * voxel_mm[1],
            origin_mm[2] + iz * voxel_mm[2]};
  }

  double voxel_volume_mm3() const { return voxel_mm[0] * voxel_mm[1] * voxel_mm[2]; }

  bool same_grid(const Volume3D& o) const {
    return dims == o.dims && voxel_mm == o.voxel_mm && origin_mm == o.origin_mm;
  }
};

/// Create a volume whose grid center sits at the world origin.
inline Volume3D make_centered_volume(std::array<int, 3> dims, std::array<double, 3> voxel_mm,
                                     double fill = 0.0) {
  Volume3D v;
  v.dims = dims;
  v.voxel_mm = voxel_mm;
  for (int ax = 0; ax < 3; ++ax) v.origin_mm[ax] = -0.5 * (dims[ax] - 1) * voxel_mm[ax];
  v.data.assign(v.size(), fill);
  return v;
}

inline void validate_volume(const Volume3D& v, bool require_nonneg = false) {
  for (int ax = 0; ax < 3; ++ax) {
    if (v.dims[ax] < 1) throw std::invalid_argument("volume: dims must be >= 1");
    if (!(v.voxel_mm[ax] > 0.0)) throw std::invalid_argument("volume: voxel size must be positive");
    if (!std::isfinite(v.origin_mm[ax])) throw std::invalid_argument("volume: origin must be finite");
  }
  if (v.data.size() != v.size()) throw std::invalid_argument("volume: data length does not match dims");
  for (double x : v.data) {
    if (!std::isfinite(x)) throw std::invalid_argument("volume: non-finite value");
    if (require_nonneg && x < 0.0) throw std::invalid_argument("volume: negative value");
  }
}

inline double integral(const Volume3D& v) {
  double s = 0.0;
  for (double x : v.data) s += x;
  return s * v.voxel_volume_mm3();
}

namespace detail {

// One box-filter pass along a single axis, in index space. Target voxel j
// covers [j*r, (j+1)*r) in source indices; values are overlap-weighted
// averages, so the pass preserves the integral and is an exact copy when
// src_n == dst_n.
inline void box_resample_axis(const std::vector<double>& src, std::vector<double>& dst, int src_n,
                              int dst_n, std::size_t stride, std::size_t lines,
                              const std::vector<std::size_t>& line_offsets) {
  const double r = static_cast<double>(src_n) / static_cast<double>(dst_n);
  for (std::size_t li = 0; li < lines; ++li) {
    const std::size_t base = line_offsets[li];
    for (int j = 0; j < dst_n; ++j) {
      const double lo = j * r;
      const double hi = (j + 1) * r;
      int i0 = static_cast<int>(std::floor(lo));
      int i1 = static_cast<int>(std::ceil(hi));
      if (i0 < 0) i0 = 0;
      if (i1 > src_n) i1 = src_n;
      double wsum = 0.0, vsum = 0.0;
      for (int i = i0; i < i1; ++i) {
        const double w = std::min(hi, static_cast<double>(i + 1)) - std::max(lo, static_cast<double>(i));
        if (w <= 0.0) continue;
        wsum += w;
        vsum += w * src[base + static_cast<std::size_t>(i) * stride];
      }
      dst[line_offsets[li + lines] + static_cast<std::size_t>(j) * stride] =
          (wsum > 0.0) ? vsum / wsum : 0.0;
    }
  }
}

}  // namespace detail

/// Volume-weighted (box filter) resampling to `target_dims` over the same
/// physical extent. Preserves the total integral.
inline Volume3D resample(const Volume3D& vol, std::array<int, 3> target_dims) {
  validate_volume(vol);
  for (int ax = 0; ax < 3; ++ax)
    if (target_dims[ax] < 1) throw std::invalid_argument("resample: target dims must be >= 1");

  Volume3D cur = vol;
  for (int ax = 0; ax < 3; ++ax) {
    if (target_dims[ax] == cur.dims[ax]) continue;
    Volume3D next;
    next.dims = cur.dims;
    next.dims[ax] = target_dims[ax];
    next.voxel_mm = cur.voxel_mm;
    next.voxel_mm[ax] = cur.voxel_mm[ax] * cur.dims[ax] / target_dims[ax];
    next.origin_mm = cur.origin_mm;
    // keep the low physical edge fixed
    next.origin_mm[ax] = (cur.origin_mm[ax] - 0.5 * cur.voxel_mm[ax]) + 0.5 * next.voxel_mm[ax];
    next.data.assign(next.size(), 0.0);

    const int nx = cur.dims[0], ny = cur.dims[1], nz = cur.dims[2];
    std::size_t stride = 1, lines = 0;
    std::vector<std::size_t> offsets;
    if (ax == 0) {
      lines = static_cast<std::size_t>(ny) * nz;
      offsets.resize(2 * lines);
      for (int iz = 0; iz < nz; ++iz)
        for (int iy = 0; iy < ny; ++iy) {
          const std::size_t li = static_cast<std::size_t>(iz) * ny + iy;
          offsets[li] = cur.index(0, iy, iz);
          offsets[li + lines] = next.index(0, iy, iz);
        }
      stride = 1;
    } else if (ax == 1) {
      lines = static_cast<std::size_t>(nx) * nz;
      offsets.resize(2 * lines);
      for (int iz = 0; iz < nz; ++iz)
        for (int ix = 0; ix < nx; ++ix) {
          const std::size_t li = static_cast<std::size_t>(iz) * nx + ix;
          offsets[li] = cur.index(ix, 0, iz);
          offsets[li + lines] = next.index(ix, 0, iz);
        }
      stride = static_cast<std::size_t>(nx);
    } else {
      lines = static_cast<std::size_t>(nx) * ny;
      offsets.resize(2 * lines);
      for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
          const std::size_t li = static_cast<std::size_t>(iy) * nx + ix;
          offsets[li] = cur.index(ix, iy, 0);
          offsets[li + lines] = next.index(ix, iy, 0);
        }
      stride = static_cast<std::size_t>(nx) * ny;
    }
    detail::box_resample_axis(cur.data, next.data, cur.dims[ax], target_dims[ax], stride, lines,
                              offsets);
    cur = std::move(next);
  }
  return cur;
}

namespace detail {

// Truncated, unit-sum Gaussian taps for one axis; empty means identity.
inline std::vector<double> gaussian_taps(double fwhm_mm, double voxel_mm) {
  if (fwhm_mm <= 0.0) return {};
  const double sigma_mm = fwhm_mm / 2.3548;
  const double sigma_vox = sigma_mm / voxel_mm;
  const int radius = static_cast<int>(std::floor(4.0 * sigma_vox));
  if (radius < 1) return {};
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double x = static_cast<double>(i) / sigma_vox;
    k[i + radius] = std::exp(-0.5 * x * x);
    sum += k[i + radius];
  }
  for (double& w : k) w /= sum;
  return k;
}

// Mass-preserving blur along one axis: each source voxel's in-grid taps are
// renormalized before spreading, so no mass is lost at the borders.
inline void blur_axis(std::vector<double>& data, int n, std::size_t stride, std::size_t lines,
                      const std::vector<std::size_t>& offsets, const std::vector<double>& taps) {
  const int radius = (static_cast<int>(taps.size()) - 1) / 2;
  // per-position sum of in-grid taps (differs from 1 only near the borders)
  std::vector<double> colsum(n, 1.0);
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(-radius, -i);
    const int hi = std::min(radius, n - 1 - i);
    double s = 0.0;
    for (int d = lo; d <= hi; ++d) s += taps[d + radius];
    colsum[i] = s;
  }
  std::vector<double> line(n), scaled(n);
  for (std::size_t li = 0; li < lines; ++li) {
    const std::size_t base = offsets[li];
    for (int i = 0; i < n; ++i) {
      line[i] = data[base + static_cast<std::size_t>(i) * stride];
      scaled[i] = line[i] / colsum[i];
    }
    for (int j = 0; j < n; ++j) {
      const int lo = std::max(-radius, j - (n - 1));
      const int hi = std::min(radius, j);
      double acc = 0.0;
      for (int d = lo; d <= hi; ++d) acc += taps[d + radius] * scaled[j - d];
      data[base + static_cast<std::size_t>(j) * stride] = acc;
    }
  }
}

inline void axis_line_offsets(const Volume3D& v, int ax, std::size_t& stride, std::size_t& lines,
                              std::vector<std::size_t>& offsets) {
  const int nx = v.dims[0], ny = v.dims[1], nz = v.dims[2];
  if (ax == 0) {
    lines = static_cast<std::size_t>(ny) * nz;
    offsets.resize(lines);
    for (int iz = 0; iz < nz; ++iz)
      for (int iy = 0; iy < ny; ++iy) offsets[static_cast<std::size_t>(iz) * ny + iy] = v.index(0, iy, iz);
    stride = 1;
  } else if (ax == 1) {
    lines = static_cast<std::size_t>(nx) * nz;
    offsets.resize(lines);
    for (int iz = 0; iz < nz; ++iz)
      for (int ix = 0; ix < nx; ++ix) offsets[static_cast<std::size_t>(iz) * nx + ix] = v.index(ix, 0, iz);
    stride = static_cast<std::size_t>(nx);
  } else {
    lines = static_cast<std::size_t>(nx) * ny;
    offsets.resize(lines);
    for (int iy = 0; iy < ny; ++iy)
      for (int ix = 0; ix < nx; ++ix) offsets[static_cast<std::size_t>(iy) * nx + ix] = v.index(ix, iy, 0);
    stride = static_cast<std::size_t>(nx) * ny;
  }
}

}  // namespace detail

/// Separable Gaussian blur with sigma = fwhm/2.3548 per axis, taps truncated
/// at +/-4 sigma and renormalized to unit sum. fwhm_mm == 0 is the identity.
inline Volume3D convolve_gaussian(const Volume3D& vol, double fwhm_mm) {
  validate_volume(vol);
  if (fwhm_mm < 0.0) throw std::invalid_argument("convolve_gaussian: fwhm must be >= 0");
  Volume3D out = vol;
  for (int ax = 0; ax < 3; ++ax) {
    const std::vector<double> taps = detail::gaussian_taps(fwhm_mm, vol.voxel_mm[ax]);
    if (taps.empty()) continue;
    std::size_t stride = 0, lines = 0;
    std::vector<std::size_t> offsets;
    detail::axis_line_offsets(out, ax, stride, lines, offsets);
    detail::blur_axis(out.data, out.dims[ax], stride, lines, offsets, taps);
  }
  return out;
}

// ---------------------------------------------------------------------------
// PVOL file format: little-endian; magic "PVOL", u32 version=1, dims 3*u32,
// voxel_mm 3*f32, origin_mm 3*f32, payload nx*ny*nz f32, x-fastest.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void write_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool read_raw(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return static_cast<bool>(is);
}

}  // namespace detail

inline void write_volume(const Volume3D& vol, const std::string& path) {
  validate_volume(vol);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_volume: cannot open " + path);
  os.write("PVOL", 4);
  detail::write_raw(os, std::uint32_t{1});
  for (int ax = 0; ax < 3; ++ax) detail::write_raw(os, static_cast<std::uint32_t>(vol.dims[ax]));
  for (int ax = 0; ax < 3; ++ax) detail::write_raw(os, static_cast<float>(vol.voxel_mm[ax]));
  for (int ax = 0; ax < 3; ++ax) detail::write_raw(os, static_cast<float>(vol.origin_mm[ax]));
  std::vector<float> payload(vol.data.size());
  for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = static_cast<float>(vol.data[i]);
  os.write(reinterpret_cast<const char*>(payload.data()),
           static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!os) throw std::runtime_error("write_volume: write failed for " + path);
}

inline Volume3D read_volume(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_volume: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "PVOL", 4) != 0)
    throw std::runtime_error("read_volume: corrupt file (bad magic): " + path);
  std::uint32_t version = 0;
  if (!detail::read_raw(is, version) || version != 1)
    throw std::runtime_error("read_volume: corrupt file (unsupported version): " + path);
  Volume3D vol;
  for (int ax = 0; ax < 3; ++ax) {
    std::uint32_t d = 0;
    if (!detail::read_raw(is, d) || d == 0)
      throw std::runtime_error("read_volume: corrupt file (bad dims): " + path);
    vol.dims[ax] = static_cast<int>(d);
  }
  for (int ax = 0; ax < 3; ++ax) {
    float f = 0;
    if (!detail::read_raw(is, f)) throw std::runtime_error("read_volume: corrupt file: " + path);
    vol.voxel_mm[ax] = f;
  }
  for (int ax = 0; ax < 3; ++ax) {
    float f = 0;
    if (!detail::read_raw(is, f)) throw std::runtime_error("read_volume: corrupt file: " + path);
    vol.origin_mm[ax] = f;
  }
  const std::size_t n = vol.size();
  std::vector<float> payload(n);
  is.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (static_cast<std::size_t>(is.gcount()) != n * sizeof(float))
    throw std::runtime_error("read_volume: corrupt file (payload truncated): " + path);
  char extra;
  if (is.read(&extra, 1))
    throw std::runtime_error("read_volume: corrupt file (trailing bytes): " + path);
  vol.data.assign(payload.begin(), payload.end());
  return vol;
}

}  // namespace petmc

#endif  // PETMC_VOLUME_HPP
