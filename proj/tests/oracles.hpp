// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

// Independent reference implementations used by the unit and acceptance tests. They favor
// directness over speed and share no code with the library beyond plain data types.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "bpcgen/bpcgen.hpp"

namespace bpcgen::oracle {

inline double sq_dist(const Points3& a, Index i, const Points3& b, Index j) {
  double s = 0;
  for (int k = 0; k < 3; ++k) s += (a(i, k) - b(j, k)) * (a(i, k) - b(j, k));
  return s;
}

/// Sum over rows of `from` of the squared distance to the closest row of `to`.
inline double one_sided(const Points3& from, const Points3& to) {
  double total = 0;
  for (Index i = 0; i < from.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < to.rows(); ++j) best = std::min(best, sq_dist(from, i, to, j));
    total += best;
  }
  return total;
}

inline double chamfer(const Points3& a, const Points3& b) { return one_sided(a, b) + one_sided(b, a); }

/// Minimum over all N! bijections of the summed Euclidean distances.
inline double emd_factorial(const Points3& a, const Points3& b) {
  std::vector<Index> perm(static_cast<std::size_t>(a.rows()));
  std::iota(perm.begin(), perm.end(), Index{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0;
    for (Index i = 0; i < a.rows(); ++i) s += std::sqrt(sq_dist(a, i, b, perm[static_cast<std::size_t>(i)]));
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// One GCN block written out per point and per ancestor, following the block equation
/// term by term: sigma( leaky(x W_in) W_out + sum_j a_j U_j + b ).
/// `ancestors[j]` holds level-j features, `anc_index(i, j)` the level-j ancestor row of point i.
template <class IndexOf>
nn::Mat<double> gcn_dense(const nn::Mat<double>& x, const std::vector<nn::Mat<double>>& ancestors, IndexOf anc_index,
                          const nn::Mat<double>& w_in, const nn::Mat<double>& w_out,
                          const std::vector<nn::Mat<double>>& u, const nn::Mat<double>& bias, double slope,
                          bool final_layer) {
  const Index n = x.rows(), out_w = w_out.cols();
  nn::Mat<double> y(n, out_w);
  for (Index i = 0; i < n; ++i) {
    std::vector<double> hidden(static_cast<std::size_t>(w_in.cols()), 0.0);
    for (Index h = 0; h < w_in.cols(); ++h) {
      double s = 0;
      for (Index c = 0; c < x.cols(); ++c) s += x(i, c) * w_in(c, h);
      hidden[static_cast<std::size_t>(h)] = s > 0 ? s : slope * s;
    }
    for (Index o = 0; o < out_w; ++o) {
      double s = bias(0, o);
      for (Index h = 0; h < w_in.cols(); ++h) s += hidden[static_cast<std::size_t>(h)] * w_out(h, o);
      for (std::size_t j = 0; j < ancestors.size(); ++j) {
        const Index r = anc_index(i, static_cast<int>(j));
        for (Index c = 0; c < ancestors[j].cols(); ++c) s += ancestors[j](r, c) * u[j](c, o);
      }
      y(i, o) = final_layer || s > 0 ? s : slope * s;
    }
  }
  return y;
}

/// Critic score computed layer by layer with explicit loops.
inline double critic_dense(const CriticParams<double>& p, const nn::Mat<double>& cloud, double slope) {
  auto act = [&](double v) { return v > 0 ? v : slope * v; };
  std::vector<std::vector<double>> feats(static_cast<std::size_t>(cloud.rows()));
  for (Index i = 0; i < cloud.rows(); ++i) feats[static_cast<std::size_t>(i)] = {cloud(i, 0), cloud(i, 1), cloud(i, 2)};
  for (std::size_t l = 0; l < p.point_w.size(); ++l)
    for (auto& f : feats) {
      std::vector<double> g(static_cast<std::size_t>(p.point_w[l].cols()));
      for (Index o = 0; o < p.point_w[l].cols(); ++o) {
        double s = p.point_b[l](0, o);
        for (std::size_t c = 0; c < f.size(); ++c) s += f[c] * p.point_w[l](static_cast<Index>(c), o);
        g[static_cast<std::size_t>(o)] = act(s);
      }
      f = g;
    }
  std::vector<double> h(feats.front().size(), -std::numeric_limits<double>::infinity());
  for (const auto& f : feats)
    for (std::size_t c = 0; c < h.size(); ++c) h[c] = std::max(h[c], f[c]);
  for (std::size_t l = 0; l < p.head_w.size(); ++l) {
    std::vector<double> g(static_cast<std::size_t>(p.head_w[l].cols()));
    for (Index o = 0; o < p.head_w[l].cols(); ++o) {
      double s = p.head_b[l](0, o);
      for (std::size_t c = 0; c < h.size(); ++c) s += h[c] * p.head_w[l](static_cast<Index>(c), o);
      g[static_cast<std::size_t>(o)] = l + 1 == p.head_w.size() ? s : act(s);
    }
    h = g;
  }
  return h[0];
}

/// Central finite-difference derivative of f at x along coordinate `*slot`.
template <class F>
double central_difference(F&& f, double* slot, double h) {
  const double orig = *slot;
  *slot = orig + h;
  const double up = f();
  *slot = orig - h;
  const double down = f();
  *slot = orig;
  return (up - down) / (2 * h);
}

}  // namespace bpcgen::oracle
