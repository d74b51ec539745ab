// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include <Eigen/Core>

#include "bpcgen/error.hpp"
#include "bpcgen/metrics/assignment.hpp"
#include "bpcgen/point_cloud.hpp"

namespace bpcgen {

enum class EmdMethod { exact_assignment, approximate };

inline const char* to_string(EmdMethod m) {
  return m == EmdMethod::exact_assignment ? "exact_assignment" : "approximate";
}

/// Earth mover's distance: total (not squared) Euclidean transport cost over the best
/// bijection. `bound_gap` is an upper bound on value - optimum (0 for the exact solver).
struct EmdResult {
  double value = 0.0;
  EmdMethod method = EmdMethod::exact_assignment;
  double bound_gap = 0.0;
};

inline constexpr Index kDefaultExactEmdLimit = 1024;
inline constexpr double kDefaultEmdEpsilon = 1e-4;

/// Pairwise Euclidean distance matrix between the rows of two clouds.
inline Eigen::MatrixXd euclidean_cost_matrix(const Points3& a, const Points3& b) {
  Eigen::MatrixXd c(a.rows(), b.rows());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.rows(); ++j) c(i, j) = (a.row(i) - b.row(j)).norm();
  return c;
}

namespace detail {
inline void check_emd_inputs(const PointCloud& Y, const PointCloud& Yp, const char* who) {
  if (Y.count() != Yp.count())
    throw InvalidInput(std::string(who) + ": clouds must have equal point counts (" +
                       std::to_string(Y.count()) + " vs " + std::to_string(Yp.count()) + ")");
  if (Y.empty()) throw InvalidInput(std::string(who) + ": empty cloud");
}
}  // namespace detail

inline EmdResult emd_exact(const PointCloud& Y, const PointCloud& Yp,
                           Index size_limit = kDefaultExactEmdLimit) {
  detail::check_emd_inputs(Y, Yp, "emd_exact");
  if (Y.count() > size_limit)
    throw InvalidInput("emd_exact: N=" + std::to_string(Y.count()) + " exceeds the exact-size limit " +
                       std::to_string(size_limit) + "; use emd_approx");
  const Assignment a = solve_assignment_exact(euclidean_cost_matrix(Y.points, Yp.points));
  return {a.cost, EmdMethod::exact_assignment, 0.0};
}

inline EmdResult emd_approx(const PointCloud& Y, const PointCloud& Yp, double epsilon) {
  detail::check_emd_inputs(Y, Yp, "emd_approx");
  if (!(epsilon > 0.0)) throw InvalidInput("emd_approx: epsilon must be positive");
  const Assignment a = solve_assignment_auction(euclidean_cost_matrix(Y.points, Yp.points), epsilon);
  return {a.cost, EmdMethod::approximate, static_cast<double>(Y.count()) * epsilon};
}

/// Exact up to `size_limit` points, auction beyond.
inline EmdResult emd(const PointCloud& Y, const PointCloud& Yp, Index size_limit = kDefaultExactEmdLimit,
                     double epsilon = kDefaultEmdEpsilon) {
  if (Y.count() <= size_limit) return emd_exact(Y, Yp, size_limit);
  return emd_approx(Y, Yp, epsilon);
}

}  // namespace bpcgen
