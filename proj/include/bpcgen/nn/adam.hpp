// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bpcgen/error.hpp"
#include "bpcgen/nn/tensor.hpp"

namespace bpcgen::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam over one parameter struct. Moment buffers follow the struct's for_each order.
template <class T>
class Adam {
 public:
  Adam() = default;

  template <class P>
  Adam(const AdamConfig& cfg, const P& params) : cfg_(cfg) {
    params.for_each([&](const std::string&, const Mat<T>& m) {
      m1_.push_back(Mat<T>::Zero(m.rows(), m.cols()));
      m2_.push_back(Mat<T>::Zero(m.rows(), m.cols()));
    });
  }

  template <class P>
  void step(P& params, const P& grads) {
    ++steps_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T step_size = static_cast<T>(cfg_.learning_rate / bc1);
    const T eps = static_cast<T>(cfg_.epsilon);
    const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));

    std::vector<Mat<T>*> p;
    std::vector<const Mat<T>*> g;
    params.for_each([&](const std::string&, Mat<T>& m) { p.push_back(&m); });
    grads.for_each([&](const std::string&, const Mat<T>& m) { g.push_back(&m); });
    if (p.size() != m1_.size() || g.size() != p.size())
      throw ConfigError("Adam: parameter structure changed since construction");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m1_[i] = b1 * m1_[i] + (T(1) - b1) * *g[i];
      m2_[i] = b2 * m2_[i] + (T(1) - b2) * g[i]->cwiseAbs2();
      p[i]->array() -= step_size * m1_[i].array() / (m2_[i].array().sqrt() * inv_sqrt_bc2 + eps);
    }
  }

  const AdamConfig& config() const { return cfg_; }
  long long steps() const { return steps_; }
  void set_steps(long long s) { steps_ = s; }
  std::vector<Mat<T>>& first_moments() { return m1_; }
  std::vector<Mat<T>>& second_moments() { return m2_; }
  const std::vector<Mat<T>>& first_moments() const { return m1_; }
  const std::vector<Mat<T>>& second_moments() const { return m2_; }

 private:
  AdamConfig cfg_;
  long long steps_ = 0;
  std::vector<Mat<T>> m1_, m2_;
};

}  // namespace bpcgen::nn
