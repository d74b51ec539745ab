// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "bpcgen/error.hpp"
#include "bpcgen/metrics/chamfer.hpp"
#include "bpcgen/ply.hpp"
#include "bpcgen/point_cloud.hpp"

namespace bpcgen {

/// Linearly interpolated quantile, position q * (n - 1) in the sorted values.
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidInput("quantile: no values");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

/// Blue (0 error) to red (at or above the 99th percentile) ramp.
inline Colors3 error_colors(const Eigen::VectorXd& errors) {
  const std::vector<double> v(errors.data(), errors.data() + errors.size());
  const double p99 = quantile(v, 0.99);
  Colors3 c(errors.size(), 3);
  for (Index i = 0; i < errors.size(); ++i) {
    double t;
    if (p99 > 0.0) t = std::clamp(errors(i) / p99, 0.0, 1.0);
    else t = errors(i) > 0.0 ? 1.0 : 0.0;
    c(i, 0) = static_cast<std::uint8_t>(std::lround(255.0 * t));
    c(i, 1) = 0;
    c(i, 2) = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - t)));
  }
  return c;
}

/// `pc` with per-vertex PC-to-PC errors against `target` and the matching ramp colors.
inline PointCloud colorize_by_error(const PointCloud& pc, const PointCloud& target) {
  if (pc.empty() || target.empty()) throw InvalidInput("export_colored: empty cloud");
  PointCloud out(pc.points);
  const Eigen::VectorXd err = pc_to_pc_errors(pc, target);
  out.vertex_errors = err;
  out.vertex_colors = error_colors(err);
  return out;
}

inline void export_colored(const PointCloud& pc, const PointCloud& target, const std::filesystem::path& out_path) {
  write_ply(colorize_by_error(pc, target), out_path);
}

}  // namespace bpcgen
