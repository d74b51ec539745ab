// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <limits>
#include <vector>

#include <Eigen/Core>

#include "bpcgen/error.hpp"
#include "bpcgen/point_cloud.hpp"

namespace bpcgen {

/// Squared distance from every row of `from` to its nearest row of `to`, and that row's index.
template <class DerivedA, class DerivedB>
void nearest_neighbors(const Eigen::MatrixBase<DerivedA>& from, const Eigen::MatrixBase<DerivedB>& to,
                       Eigen::VectorXd& d2, std::vector<Index>* argmin = nullptr) {
  const Index n = from.rows(), m = to.rows();
  if (n == 0 || m == 0) throw InvalidInput("nearest neighbor query on an empty cloud");
  d2.resize(n);
  if (argmin) argmin->assign(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < n; ++i) {
    const double px = static_cast<double>(from(i, 0));
    const double py = static_cast<double>(from(i, 1));
    const double pz = static_cast<double>(from(i, 2));
    double best = std::numeric_limits<double>::infinity();
    Index best_j = 0;
    for (Index j = 0; j < m; ++j) {
      const double dx = px - static_cast<double>(to(j, 0));
      const double dy = py - static_cast<double>(to(j, 1));
      const double dz = pz - static_cast<double>(to(j, 2));
      const double d = dx * dx + dy * dy + dz * dz;
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    d2(i) = best;
    if (argmin) (*argmin)[static_cast<std::size_t>(i)] = best_j;
  }
}

/// min over y in Y of ||y' - y||^2.
inline double pc_to_pc_error_point(const Eigen::RowVector3d& yp, const PointCloud& Y) {
  if (Y.empty()) throw InvalidInput("pc_to_pc_error_point: empty reference cloud");
  return (Y.points.rowwise() - yp).rowwise().squaredNorm().minCoeff();
}

/// Per-vertex PC-to-PC error of every generated vertex against the reference cloud.
inline Eigen::VectorXd pc_to_pc_errors(const PointCloud& Yp, const PointCloud& Y) {
  Eigen::VectorXd d2;
  nearest_neighbors(Yp.points, Y.points, d2);
  return d2;
}

/// Sum of per-vertex PC-to-PC errors of Yp against Y (one direction of the Chamfer distance).
inline double pc_to_pc_error_total(const PointCloud& Yp, const PointCloud& Y) {
  if (Yp.empty() || Y.empty()) throw InvalidInput("pc_to_pc_error_total: empty cloud");
  return pc_to_pc_errors(Yp, Y).sum();
}

/// Symmetric Chamfer distance: sum of squared nearest-neighbor distances in both directions.
inline double chamfer_distance(const PointCloud& Y, const PointCloud& Yp) {
  if (Y.empty() || Yp.empty()) throw InvalidInput("chamfer_distance: empty cloud");
  return pc_to_pc_error_total(Yp, Y) + pc_to_pc_error_total(Y, Yp);
}

/// Chamfer distance between a predicted cloud of any scalar type and a reference cloud,
/// together with d CD / d pred. Accumulation happens in double.
template <class Derived>
double chamfer_with_gradient(const Eigen::MatrixBase<Derived>& pred, const Points3& target,
                             Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic,
                                           Eigen::RowMajor>& grad) {
  using T = typename Derived::Scalar;
  Eigen::VectorXd d_pt, d_tp;
  std::vector<Index> nn_pt, nn_tp;
  nearest_neighbors(pred, target, d_pt, &nn_pt);
  nearest_neighbors(target, pred, d_tp, &nn_tp);
  Points3 g = Points3::Zero(pred.rows(), 3);
  for (Index i = 0; i < pred.rows(); ++i) {
    const Index j = nn_pt[static_cast<std::size_t>(i)];
    for (int k = 0; k < 3; ++k)
      g(i, k) += 2.0 * (static_cast<double>(pred(i, k)) - target(j, k));
  }
  for (Index j = 0; j < target.rows(); ++j) {
    const Index i = nn_tp[static_cast<std::size_t>(j)];
    for (int k = 0; k < 3; ++k)
      g(i, k) += 2.0 * (static_cast<double>(pred(i, k)) - target(j, k));
  }
  grad = g.cast<T>();
  return d_pt.sum() + d_tp.sum();
}

}  // namespace bpcgen
