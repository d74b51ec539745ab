// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bpcgen/metrics/chamfer.hpp"
#include "bpcgen/point_cloud.hpp"

namespace bpcgen {

struct RegionError {
  std::string name;
  Index member_count = 0;
  /// Mean per-vertex PC-to-PC error; empty when no generated vertex falls in the region.
  std::optional<double> mean_error;
};

struct RegionErrorTable {
  std::vector<RegionError> regions;
  Index total_count = 0;
  double total_mean = 0.0;
};

/// Mean per-vertex PC-to-PC error of the generated cloud restricted to each region box,
/// plus the mean over the whole cloud.
inline RegionErrorTable region_error_report(const PointCloud& Yp, const PointCloud& Y,
                                            const std::vector<RegionBox>& boxes) {
  if (Yp.empty() || Y.empty()) throw InvalidInput("region_error_report: empty cloud");
  const Eigen::VectorXd err = pc_to_pc_errors(Yp, Y);
  const auto members = assign_regions(Yp, boxes);
  RegionErrorTable table;
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    RegionError r{boxes[b].name, static_cast<Index>(members[b].size()), std::nullopt};
    if (!members[b].empty()) {
      double s = 0.0;
      for (Index i : members[b]) s += err(i);
      r.mean_error = s / static_cast<double>(members[b].size());
    }
    table.regions.push_back(std::move(r));
  }
  table.total_count = Yp.count();
  table.total_mean = err.mean();
  return table;
}

}  // namespace bpcgen
