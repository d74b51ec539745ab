// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace bpcgen::nn {

/// Dense row-major matrix. Every trainable parameter is stored as one of these;
/// biases are 1 x n (dense layers) or n x 1 (convolutions).
template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
void leaky_relu_inplace(Mat<T>& a, T slope) {
  a = a.cwiseMax(a * slope);
}

template <class T>
Mat<T> leaky_relu(const Mat<T>& a, T slope) {
  return a.cwiseMax(a * slope);
}

/// Multiplies `delta` by the leaky rectifier's derivative evaluated at `pre`.
template <class T>
void leaky_relu_backward_inplace(Mat<T>& delta, const Mat<T>& pre, T slope) {
  delta = (pre.array() > T(0)).select(delta, delta * slope);
}

/// Fills `m` with U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <class T>
void init_uniform(Mat<T>& m, Eigen::Index fan_in, std::mt19937_64& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-s, s);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng));
}

/// Parameter structs expose `for_each(f)` with f(const std::string& name, Mat<T>& value).
/// These helpers work on any such struct.
template <class P>
P zeros_like(const P& p) {
  P z = p;
  z.for_each([](const std::string&, auto& m) { m.setZero(); });
  return z;
}

template <class P, class M>
void collect_params(P& p, std::vector<M*>& out) {
  p.for_each([&](const std::string&, M& m) { out.push_back(&m); });
}

template <class P>
std::size_t parameter_count(const P& p) {
  std::size_t n = 0;
  p.for_each([&](const std::string&, const auto& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

template <class P>
bool all_finite(const P& p) {
  bool ok = true;
  p.for_each([&](const std::string&, const auto& m) { ok = ok && m.allFinite(); });
  return ok;
}

/// a += scale * b, elementwise over matching parameter structs.
template <class P, class T>
void axpy_params(P& a, const P& b, T scale) {
  std::vector<Mat<T>*> pa;
  std::vector<const Mat<T>*> pb;
  a.for_each([&](const std::string&, Mat<T>& m) { pa.push_back(&m); });
  b.for_each([&](const std::string&, const Mat<T>& m) { pb.push_back(&m); });
  for (std::size_t i = 0; i < pa.size(); ++i) *pa[i] += scale * *pb[i];
}

}  // namespace bpcgen::nn
