// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bpcgen/error.hpp"

namespace bpcgen {

using Points3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Colors3 = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Index = Eigen::Index;

/// N ordered 3D vertices, optionally carrying a per-vertex error and an RGB color.
struct PointCloud {
  Points3 points;
  std::optional<Eigen::VectorXd> vertex_errors;
  std::optional<Colors3> vertex_colors;

  PointCloud() = default;
  explicit PointCloud(Points3 p) : points(std::move(p)) {}

  Index count() const { return points.rows(); }
  bool empty() const { return points.rows() == 0; }

  /// Throws InvalidInput if any invariant is broken.
  void validate() const {
    if (!points.allFinite()) throw InvalidInput("point cloud has non-finite coordinates");
    if (vertex_errors) {
      if (vertex_errors->size() != count())
        throw InvalidInput("vertex_errors length does not match point count");
      if ((vertex_errors->array() < 0.0).any() || !vertex_errors->allFinite())
        throw InvalidInput("vertex_errors must be finite and non-negative");
    }
    if (vertex_colors && vertex_colors->rows() != count())
      throw InvalidInput("vertex_colors row count does not match point count");
  }

  /// Rows `indices` of this cloud, attributes included.
  PointCloud select(const std::vector<Index>& indices) const {
    PointCloud out;
    out.points.resize(static_cast<Index>(indices.size()), 3);
    if (vertex_errors) out.vertex_errors = Eigen::VectorXd(static_cast<Index>(indices.size()));
    if (vertex_colors) out.vertex_colors = Colors3(static_cast<Index>(indices.size()), 3);
    for (std::size_t r = 0; r < indices.size(); ++r) {
      const auto row = static_cast<Index>(r);
      out.points.row(row) = points.row(indices[r]);
      if (vertex_errors) (*out.vertex_errors)(row) = (*vertex_errors)(indices[r]);
      if (vertex_colors) out.vertex_colors->row(row) = vertex_colors->row(indices[r]);
    }
    return out;
  }
};

/// Named axis-aligned box in normalized coordinates, used for region-wise error tables.
struct RegionBox {
  std::string name;
  Eigen::Vector3d min_corner;
  Eigen::Vector3d max_corner;

  void validate() const {
    if (name.empty()) throw InvalidInput("region box name must be nonempty");
    for (int k = 0; k < 3; ++k)
      if (!(min_corner[k] <= max_corner[k]))
        throw InvalidInput("region box '" + name + "' has min_corner > max_corner");
  }

  bool contains(const Eigen::Ref<const Eigen::RowVector3d>& p) const {
    for (int k = 0; k < 3; ++k)
      if (p[k] < min_corner[k] || p[k] > max_corner[k]) return false;
    return true;
  }
};

/// Centers the cloud on its centroid and scales it so the largest |coordinate| is 1.
inline PointCloud normalize_unit(const PointCloud& pc) {
  if (pc.empty()) throw InvalidInput("normalize_unit: empty point cloud");
  pc.validate();
  const Eigen::RowVector3d centroid = pc.points.colwise().mean();
  PointCloud out = pc;
  out.points.rowwise() -= centroid;
  const double scale = out.points.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) throw InvalidInput("normalize_unit: degenerate cloud (all points identical)");
  out.points /= scale;
  return out;
}

/// Indices chosen by greedy farthest-point sampling starting at `seed_index`.
/// Ties go to the lowest index.
inline std::vector<Index> farthest_point_indices(const Points3& pts, Index k, Index seed_index) {
  const Index n = pts.rows();
  if (k < 1 || k > n)
    throw InvalidInput("farthest_point_sample: k=" + std::to_string(k) + " outside [1, " +
                       std::to_string(n) + "]");
  if (seed_index < 0 || seed_index >= n)
    throw InvalidInput("farthest_point_sample: seed_index out of range");

  std::vector<Index> chosen;
  chosen.reserve(static_cast<std::size_t>(k));
  // -1 marks already selected rows.
  std::vector<double> min_d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  Index last = seed_index;
  chosen.push_back(last);
  min_d2[static_cast<std::size_t>(last)] = -1.0;
  while (static_cast<Index>(chosen.size()) < k) {
    const Eigen::RowVector3d p = pts.row(last);
    Index best = -1;
    double best_d2 = -1.0;
    for (Index i = 0; i < n; ++i) {
      double& d = min_d2[static_cast<std::size_t>(i)];
      if (d < 0.0) continue;
      d = std::min(d, (pts.row(i) - p).squaredNorm());
      if (d > best_d2) {
        best_d2 = d;
        best = i;
      }
    }
    last = best;
    chosen.push_back(last);
    min_d2[static_cast<std::size_t>(last)] = -1.0;
  }
  return chosen;
}

inline PointCloud farthest_point_sample(const PointCloud& pc, Index k, Index seed_index) {
  return pc.select(farthest_point_indices(pc.points, k, seed_index));
}

/// For each box, the indices of vertices inside it (closed bounds). Sets may overlap.
inline std::vector<std::vector<Index>> assign_regions(const PointCloud& pc,
                                                      const std::vector<RegionBox>& boxes) {
  if (boxes.empty()) throw InvalidInput("assign_regions: no region boxes given");
  std::vector<std::vector<Index>> out(boxes.size());
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    boxes[b].validate();
    for (Index i = 0; i < pc.count(); ++i)
      if (boxes[b].contains(pc.points.row(i))) out[b].push_back(i);
  }
  return out;
}

/// Three illustrative regions (frontal, superior, occipital) in the normalized frame.
/// Axis convention: x left-right, y posterior-anterior, z inferior-superior.
inline std::vector<RegionBox> default_region_boxes() {
  return {
      {"pink", {-1.0, 0.35, -1.0}, {1.0, 1.0, 1.0}},
      {"blue", {-1.0, -0.35, 0.25}, {1.0, 0.35, 1.0}},
      {"green", {-1.0, -1.0, -1.0}, {1.0, -0.35, 1.0}},
  };
}

}  // namespace bpcgen
