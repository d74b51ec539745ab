// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bpcgen/error.hpp"
#include "bpcgen/model/encoder.hpp"
#include "bpcgen/point_cloud.hpp"

namespace bpcgen {

inline constexpr std::array<int, 3> kPhantomGrid{91, 109, 91};

/// splitmix64 finalizer; combines a base seed with stream identifiers.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Binary occupancy grid; voxel (i,j,k) is data[(i*ny + j)*nz + k].
struct Volume {
  std::array<int, 3> dims{0, 0, 0};
  std::vector<std::uint8_t> data;

  Volume() = default;
  explicit Volume(std::array<int, 3> d)
      : dims(d), data(static_cast<std::size_t>(d[0]) * d[1] * d[2], 0) {}

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k;
  }
  bool in_bounds(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
  }
  std::uint8_t at(int i, int j, int k) const { return data[index(i, j, k)]; }
  std::uint8_t& at(int i, int j, int k) { return data[index(i, j, k)]; }
  std::size_t occupied() const {
    std::size_t n = 0;
    for (auto v : data) n += v != 0;
    return n;
  }
};

struct Ellipsoid {
  Eigen::Vector3d center;
  Eigen::Vector3d semi_axes;
};

/// Radial surface bump: unit direction and signed weight.
struct Bump {
  Eigen::Vector3d direction;
  double weight = 0.0;
};

/// Two-hemisphere brain-like phantom on the 91 x 109 x 91 grid.
///
/// A voxel center p is inside hemisphere h when, with q = (p - c) / semi_axes,
/// |q| <= 1 + bump_amplitude * tanh(sum_k w_k exp(-(1 - q_hat . v_k) / bump_width^2)),
/// and it lies outside the midline slab |x - (nx-1)/2| < midline_gap / 2.
/// The tanh keeps the radial factor inside 1 +- bump_amplitude.
struct PhantomSpec {
  std::uint64_t seed = 0;
  std::array<Ellipsoid, 2> hemispheres{{
      {{27.0, 54.0, 45.0}, {19.0, 44.0, 33.0}},
      {{63.0, 54.0, 45.0}, {19.0, 44.0, 33.0}},
  }};
  double midline_gap = 2.0;
  int bump_count = 10;
  double bump_amplitude = 0.08;
  double bump_width = 0.35;
  std::array<int, 3> grid_dims = kPhantomGrid;

  void validate() const {
    if (grid_dims != kPhantomGrid) throw InvalidInput("phantom: grid_dims must be 91x109x91");
    if (midline_gap < 0.0) throw InvalidInput("phantom: midline_gap must be non-negative");
    if (bump_count < 0 || bump_amplitude < 0.0 || bump_amplitude >= 1.0 || !(bump_width > 0.0))
      throw InvalidInput("phantom: invalid bump parameters");
    for (const auto& e : hemispheres)
      for (int a = 0; a < 3; ++a) {
        if (!(e.semi_axes[a] > 0.0)) throw InvalidInput("phantom: semi-axes must be positive");
        const double reach = e.semi_axes[a] * (1.0 + bump_amplitude);
        if (e.center[a] - reach < 0.0 || e.center[a] + reach > grid_dims[static_cast<std::size_t>(a)] - 1)
          throw InvalidInput("phantom: ellipsoid exceeds the grid along axis " + std::to_string(a));
      }
  }

  /// Bumps for each hemisphere, drawn from `seed`.
  std::array<std::vector<Bump>, 2> bumps() const {
    std::array<std::vector<Bump>, 2> out;
    for (std::size_t h = 0; h < 2; ++h) {
      std::mt19937_64 rng(mix_seed(seed, 1000 + h));
      std::normal_distribution<double> normal;
      std::uniform_real_distribution<double> weight(-1.0, 1.0);
      for (int k = 0; k < bump_count; ++k) {
        Eigen::Vector3d v(normal(rng), normal(rng), normal(rng));
        v.normalize();
        out[h].push_back({v, weight(rng)});
      }
    }
    return out;
  }

  /// A per-subject variant of this template: semi-axes jittered by up to 8% and fresh bumps.
  /// Each hemisphere is then shifted along x so its medial side still reaches the midline slab.
  PhantomSpec subject(std::uint64_t subject_seed) const {
    PhantomSpec s = *this;
    s.seed = subject_seed;
    std::mt19937_64 rng(mix_seed(subject_seed, 7));
    std::uniform_real_distribution<double> jitter(0.92, 1.08);
    Eigen::Vector3d scale(jitter(rng), jitter(rng), jitter(rng));
    for (auto& e : s.hemispheres) {
      Eigen::Vector3d side(std::uniform_real_distribution<double>(0.97, 1.03)(rng), 1.0, 1.0);
      e.semi_axes = e.semi_axes.cwiseProduct(scale).cwiseProduct(side);
      const double mid = (grid_dims[0] - 1) / 2.0;
      const double medial = midline_gap / 2.0 - 0.5 + e.semi_axes[0] * (1.0 - bump_amplitude);
      e.center[0] = e.center[0] < mid ? mid - medial : mid + medial;
      for (int a = 0; a < 3; ++a) {
        const double limit = std::min(e.center[a], grid_dims[static_cast<std::size_t>(a)] - 1 - e.center[a]) /
                             (1.0 + bump_amplitude);
        e.semi_axes[a] = std::min(e.semi_axes[a], limit);
      }
    }
    return s;
  }
};

inline Volume make_phantom_volume(const PhantomSpec& spec) {
  spec.validate();
  Volume vol(spec.grid_dims);
  const auto bumps = spec.bumps();
  const double mid_x = (spec.grid_dims[0] - 1) / 2.0;
  const double inv_w2 = 1.0 / (spec.bump_width * spec.bump_width);
  const double amp = spec.bump_amplitude;
  for (int i = 0; i < vol.dims[0]; ++i) {
    if (std::abs(i - mid_x) < spec.midline_gap / 2.0) continue;
    for (int j = 0; j < vol.dims[1]; ++j)
      for (int k = 0; k < vol.dims[2]; ++k) {
        bool inside = false;
        for (std::size_t h = 0; h < 2 && !inside; ++h) {
          const auto& e = spec.hemispheres[h];
          const Eigen::Vector3d q((i - e.center[0]) / e.semi_axes[0], (j - e.center[1]) / e.semi_axes[1],
                                  (k - e.center[2]) / e.semi_axes[2]);
          const double rho = q.norm();
          if (rho <= 1.0 - amp) {
            inside = true;
          } else if (rho <= 1.0 + amp && amp > 0.0) {
            const Eigen::Vector3d u = q / rho;
            double field = 0.0;
            for (const auto& b : bumps[h]) field += b.weight * std::exp(-(1.0 - u.dot(b.direction)) * inv_w2);
            inside = rho <= 1.0 + amp * std::tanh(field);
          }
        }
        if (inside) vol.at(i, j, k) = 1;
      }
  }
  return vol;
}

/// Occupied voxels with at least one empty (or out-of-grid) 6-neighbor, in linear order.
inline std::vector<std::array<int, 3>> surface_voxels(const Volume& vol) {
  static constexpr int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  std::vector<std::array<int, 3>> out;
  for (int i = 0; i < vol.dims[0]; ++i)
    for (int j = 0; j < vol.dims[1]; ++j)
      for (int k = 0; k < vol.dims[2]; ++k) {
        if (!vol.at(i, j, k)) continue;
        for (const auto& o : off) {
          const int a = i + o[0], b = j + o[1], c = k + o[2];
          if (!vol.in_bounds(a, b, c) || !vol.at(a, b, c)) {
            out.push_back({i, j, k});
            break;
          }
        }
      }
  return out;
}

/// Farthest-point samples `point_count` surface voxel centers and normalizes the result.
inline PointCloud volume_to_cloud(const Volume& vol, Index point_count, Index seed_index = 0) {
  const auto surface = surface_voxels(vol);
  if (static_cast<Index>(surface.size()) < point_count)
    throw InvalidInput("volume_to_cloud: only " + std::to_string(surface.size()) + " surface voxels for " +
                       std::to_string(point_count) + " points");
  Points3 pts(static_cast<Index>(surface.size()), 3);
  for (std::size_t r = 0; r < surface.size(); ++r)
    for (int a = 0; a < 3; ++a) pts(static_cast<Index>(r), a) = surface[r][static_cast<std::size_t>(a)];
  return normalize_unit(farthest_point_sample(PointCloud(std::move(pts)), point_count, seed_index));
}

/// Occupancy blurred twice by a 3x3x3 box filter (zero outside the grid).
inline std::vector<double> smooth_intensity(const Volume& vol) {
  const int nx = vol.dims[0], ny = vol.dims[1], nz = vol.dims[2];
  std::vector<double> a(vol.data.begin(), vol.data.end()), b(a.size());
  auto pass = [&](std::vector<double>& src, std::vector<double>& dst, int axis) {
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < ny; ++j)
        for (int k = 0; k < nz; ++k) {
          double s = 0.0;
          for (int d = -1; d <= 1; ++d) {
            int p[3] = {i, j, k};
            p[axis] += d;
            if (vol.in_bounds(p[0], p[1], p[2])) s += src[vol.index(p[0], p[1], p[2])];
          }
          dst[vol.index(i, j, k)] = s / 3.0;
        }
  };
  for (int rep = 0; rep < 2; ++rep)
    for (int axis = 0; axis < 3; ++axis) {
      pass(a, b, axis);
      std::swap(a, b);
    }
  return a;
}

/// Size of the plane's slice index range.
inline int plane_extent(const std::array<int, 3>& dims, SlicePlane plane) {
  switch (plane) {
    case SlicePlane::axial: return dims[2];
    case SlicePlane::coronal: return dims[1];
    case SlicePlane::sagittal: return dims[0];
  }
  return 0;
}

/// Section of a smoothed intensity field, min-max normalized to [0,1] (constant -> 0).
/// Axial fixes k (image x by y), coronal fixes j (x by z), sagittal fixes i (y by z).
inline SliceImage extract_slice_from_intensity(const Volume& vol, const std::vector<double>& intensity,
                                               SlicePlane plane, int index) {
  if (index < 0 || index >= plane_extent(vol.dims, plane))
    throw InvalidInput(std::string("extract_slice: index out of range for ") + to_string(plane) + " plane");
  const int nx = vol.dims[0], ny = vol.dims[1], nz = vol.dims[2];
  SliceImage img;
  img.plane = plane;
  switch (plane) {
    case SlicePlane::axial:
      img.pixels.resize(nx, ny);
      for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j) img.pixels(i, j) = intensity[vol.index(i, j, index)];
      break;
    case SlicePlane::coronal:
      img.pixels.resize(nx, nz);
      for (int i = 0; i < nx; ++i)
        for (int k = 0; k < nz; ++k) img.pixels(i, k) = intensity[vol.index(i, index, k)];
      break;
    case SlicePlane::sagittal:
      img.pixels.resize(ny, nz);
      for (int j = 0; j < ny; ++j)
        for (int k = 0; k < nz; ++k) img.pixels(j, k) = intensity[vol.index(index, j, k)];
      break;
  }
  const double lo = img.pixels.minCoeff(), hi = img.pixels.maxCoeff();
  if (hi > lo)
    img.pixels = ((img.pixels.array() - lo) / (hi - lo)).matrix();
  else
    img.pixels.setZero();
  return img;
}

inline SliceImage extract_slice(const Volume& vol, SlicePlane plane, int index) {
  return extract_slice_from_intensity(vol, smooth_intensity(vol), plane, index);
}

inline SliceImage extract_central_slice(const Volume& vol, SlicePlane plane) {
  return extract_slice(vol, plane, plane_extent(vol.dims, plane) / 2);
}

}  // namespace bpcgen
