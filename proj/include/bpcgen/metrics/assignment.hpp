// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "bpcgen/error.hpp"

namespace bpcgen {

/// A complete one-to-one matching of rows to columns of a square cost matrix.
struct Assignment {
  std::vector<int> row_to_col;
  double cost = 0.0;
};

namespace detail {

inline double assignment_cost(const Eigen::MatrixXd& cost, const std::vector<int>& row_to_col) {
  double total = 0.0;
  for (std::size_t i = 0; i < row_to_col.size(); ++i)
    total += cost(static_cast<Eigen::Index>(i), row_to_col[i]);
  return total;
}

}  // namespace detail

/// Minimum-cost perfect matching by the shortest augmenting path form of the
/// Hungarian method (Kuhn-Munkres with potentials). O(n^3).
inline Assignment solve_assignment_exact(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) throw InvalidInput("assignment: cost matrix must be square");
  const int n = static_cast<int>(cost.rows());
  Assignment out;
  if (n == 0) return out;
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is a virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> owner(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    owner[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = owner[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const int j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  out.row_to_col.assign(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) out.row_to_col[static_cast<std::size_t>(owner[j] - 1)] = j - 1;
  out.cost = detail::assignment_cost(cost, out.row_to_col);
  return out;
}

/// Forward (Gauss-Seidel) auction with epsilon scaling. The returned matching costs at
/// most n * epsilon more than the optimum.
inline Assignment solve_assignment_auction(const Eigen::MatrixXd& cost, double epsilon,
                                           double scaling_factor = 5.0) {
  if (cost.rows() != cost.cols()) throw InvalidInput("assignment: cost matrix must be square");
  if (!(epsilon > 0.0)) throw InvalidInput("auction: epsilon must be positive");
  const int n = static_cast<int>(cost.rows());
  Assignment out;
  if (n == 0) return out;

  // Bidders maximize benefit = -cost.
  std::vector<double> price(static_cast<std::size_t>(n), 0.0);
  std::vector<int> person_obj(static_cast<std::size_t>(n), -1), obj_person(static_cast<std::size_t>(n), -1);
  const double spread = cost.maxCoeff() - cost.minCoeff();
  double eps = std::max(spread / 2.0, epsilon);
  std::vector<int> queue;
  queue.reserve(static_cast<std::size_t>(n));
  for (;;) {
    std::fill(person_obj.begin(), person_obj.end(), -1);
    std::fill(obj_person.begin(), obj_person.end(), -1);
    queue.clear();
    for (int i = n - 1; i >= 0; --i) queue.push_back(i);
    while (!queue.empty()) {
      const int i = queue.back();
      queue.pop_back();
      double best = -std::numeric_limits<double>::infinity();
      double second = best;
      int best_j = -1;
      for (int j = 0; j < n; ++j) {
        const double value = -cost(i, j) - price[static_cast<std::size_t>(j)];
        if (value > best) {
          second = best;
          best = value;
          best_j = j;
        } else if (value > second) {
          second = value;
        }
      }
      // A single object leaves no competition; any finite increment keeps eps-CS.
      const double increment = (n == 1 ? 0.0 : best - second) + eps;
      price[static_cast<std::size_t>(best_j)] += increment;
      const int prev = obj_person[static_cast<std::size_t>(best_j)];
      if (prev >= 0) {
        person_obj[static_cast<std::size_t>(prev)] = -1;
        queue.push_back(prev);
      }
      obj_person[static_cast<std::size_t>(best_j)] = i;
      person_obj[static_cast<std::size_t>(i)] = best_j;
    }
    if (eps <= epsilon) break;
    eps = std::max(eps / scaling_factor, epsilon);
  }
  out.row_to_col = std::move(person_obj);
  out.cost = detail::assignment_cost(cost, out.row_to_col);
  return out;
}

}  // namespace bpcgen
