// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bpcgen/error.hpp"
#include "bpcgen/nn/tensor.hpp"

namespace bpcgen {

using nn::Mat;

/// Shared per-point affine stack -> max pool over points -> affine head to one score.
/// Leaky rectification after every layer except the final scalar output.
struct CriticConfig {
  std::vector<int> point_widths{3, 64, 128, 256, 512};
  std::vector<int> head_widths{512, 128, 64, 1};
  double leaky_slope = 0.2;

  void validate() const {
    if (point_widths.size() < 2 || point_widths.front() != 3)
      throw ConfigError("critic: point_widths must start at 3 and have at least one layer");
    if (head_widths.size() < 2 || head_widths.back() != 1)
      throw ConfigError("critic: head_widths must end at 1 and have at least one layer");
    if (head_widths.front() != point_widths.back())
      throw ConfigError("critic: head input width must equal the last per-point width");
    for (int w : point_widths)
      if (w < 1) throw ConfigError("critic: widths must be positive");
    for (int w : head_widths)
      if (w < 1) throw ConfigError("critic: widths must be positive");
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ConfigError("critic: leaky_slope must lie in (0,1)");
  }
};

template <class T>
struct CriticParams {
  std::vector<Mat<T>> point_w, point_b;
  std::vector<Mat<T>> head_w, head_b;

  template <class F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <class F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

  static CriticParams make(const CriticConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    CriticParams p;
    auto add = [&](std::vector<Mat<T>>& ws, std::vector<Mat<T>>& bs, const std::vector<int>& widths) {
      for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        Mat<T> w(widths[i], widths[i + 1]);
        nn::init_uniform(w, widths[i], rng);
        ws.push_back(std::move(w));
        bs.push_back(Mat<T>::Zero(1, widths[i + 1]));
      }
    };
    add(p.point_w, p.point_b, cfg.point_widths);
    add(p.head_w, p.head_b, cfg.head_widths);
    return p;
  }

 private:
  template <class Self, class F>
  static void visit(Self& s, F& f) {
    for (std::size_t i = 0; i < s.point_w.size(); ++i) {
      f("critic.point" + std::to_string(i) + ".weight", s.point_w[i]);
      f("critic.point" + std::to_string(i) + ".bias", s.point_b[i]);
    }
    for (std::size_t i = 0; i < s.head_w.size(); ++i) {
      f("critic.head" + std::to_string(i) + ".weight", s.head_w[i]);
      f("critic.head" + std::to_string(i) + ".bias", s.head_b[i]);
    }
  }
};

/// Result of differentiating a critic at one cloud.
template <class T>
struct CriticEvaluation {
  T score{};
  Mat<T> input_grad;  ///< d score / d cloud, N x 3
};

/// Permutation-invariant point-cloud critic.
///
/// Besides the usual forward/backward, it provides the parameter gradient of the
/// gradient penalty (||d score/d x|| - 1)^2. That needs d/dtheta <grad_x D, v> for a fixed
/// v, which is computed by pushing the tangent v forward through the network once and
/// pairing it with the backward deltas: the network is piecewise linear in x, so every
/// backward delta is locally constant in x and the weight term reduces to
/// (tangent of layer input)^T * delta.
template <class T>
class PointCritic {
 public:
  using Params = CriticParams<T>;

  PointCritic(CriticConfig cfg, Params params) : cfg_(std::move(cfg)), params_(std::move(params)) {
    cfg_.validate();
    if (params_.point_w.size() + 1 != cfg_.point_widths.size() || params_.head_w.size() + 1 != cfg_.head_widths.size())
      throw ConfigError("critic: parameter layer count does not match config");
  }
  PointCritic(CriticConfig cfg, std::mt19937_64& rng) : PointCritic(cfg, Params::make(cfg, rng)) {}

  const CriticConfig& config() const { return cfg_; }
  Params& params() { return params_; }
  const Params& params() const { return params_; }

  T score(const Mat<T>& cloud) const {
    Trace tr;
    return forward(cloud, tr);
  }

  /// Score and its gradient with respect to the cloud coordinates.
  CriticEvaluation<T> evaluate(const Mat<T>& cloud) const {
    Trace tr;
    CriticEvaluation<T> out;
    out.score = forward(cloud, tr);
    backward(tr, T(0), nullptr, &out.input_grad);
    return out;
  }

  /// grad += weight * d score / d params. Returns the score.
  T accumulate_score_gradient(const Mat<T>& cloud, T weight, Params& grad) const {
    Trace tr;
    const T s = forward(cloud, tr);
    backward(tr, weight, &grad, nullptr);
    return s;
  }

  /// Returns (||d score/d x_hat|| - 1)^2 and, if `grad` is given, adds
  /// weight * d penalty / d params into it.
  T gradient_penalty(const Mat<T>& x_hat, T weight, Params* grad) const {
    Trace tr;
    forward(x_hat, tr);
    Mat<T> g;
    backward(tr, T(0), nullptr, &g);
    const T norm = g.norm();
    const T penalty = (norm - T(1)) * (norm - T(1));
    if (grad && norm > T(0)) {
      const T coef = weight * T(2) * (norm - T(1)) / norm;
      tangent_weight_gradient(tr, g, coef, *grad);
    }
    return penalty;
  }

 private:
  struct Trace {
    std::vector<Mat<T>> point_in, point_pre;  // per-point layers
    Eigen::Matrix<Index, 1, Eigen::Dynamic> argmax;
    std::vector<Mat<T>> head_in, head_pre;
    std::vector<Mat<T>> point_delta, head_delta;  // d score / d pre-activations
  };

  T forward(const Mat<T>& cloud, Trace& tr) const {
    if (cloud.cols() != 3 || cloud.rows() < 1) throw InvalidInput("critic: cloud must be N x 3 with N >= 1");
    const T slope = static_cast<T>(cfg_.leaky_slope);
    Mat<T> h = cloud;
    for (std::size_t i = 0; i < params_.point_w.size(); ++i) {
      tr.point_in.push_back(h);
      Mat<T> pre = h * params_.point_w[i];
      pre.rowwise() += params_.point_b[i].row(0);
      h = nn::leaky_relu(pre, slope);
      tr.point_pre.push_back(std::move(pre));
    }
    const Index c = h.cols();
    tr.argmax.resize(c);
    Mat<T> pooled(1, c);
    for (Index k = 0; k < c; ++k) {
      Index best = 0;
      for (Index i = 1; i < h.rows(); ++i)
        if (h(i, k) > h(best, k)) best = i;
      tr.argmax(k) = best;
      pooled(0, k) = h(best, k);
    }
    Mat<T> v = pooled;
    const std::size_t n_head = params_.head_w.size();
    for (std::size_t i = 0; i < n_head; ++i) {
      tr.head_in.push_back(v);
      Mat<T> pre = v * params_.head_w[i] + params_.head_b[i];
      v = i + 1 == n_head ? pre : nn::leaky_relu(pre, slope);
      tr.head_pre.push_back(std::move(pre));
    }
    if (!std::isfinite(static_cast<double>(v(0, 0)))) throw NumericFailure("critic: non-finite score");
    return v(0, 0);
  }

  /// Backward pass from d/dscore = 1. Stores deltas in the trace; optionally accumulates
  /// weight * parameter gradients and/or returns the input gradient.
  void backward(Trace& tr, T weight, Params* grad, Mat<T>* input_grad) const {
    const T slope = static_cast<T>(cfg_.leaky_slope);
    const std::size_t n_head = params_.head_w.size();
    tr.head_delta.assign(n_head, Mat<T>());
    Mat<T> d = Mat<T>::Ones(1, 1);
    for (std::size_t i = n_head; i-- > 0;) {
      if (i + 1 != n_head) nn::leaky_relu_backward_inplace(d, tr.head_pre[i], slope);
      tr.head_delta[i] = d;
      if (grad) {
        grad->head_w[i].noalias() += weight * (tr.head_in[i].transpose() * d);
        grad->head_b[i] += weight * d;
      }
      d = d * params_.head_w[i].transpose();
    }
    // Max pool: route each channel's delta to its argmax point.
    const std::size_t n_point = params_.point_w.size();
    Mat<T> dh = Mat<T>::Zero(tr.point_pre.back().rows(), tr.point_pre.back().cols());
    for (Index k = 0; k < dh.cols(); ++k) dh(tr.argmax(k), k) = d(0, k);
    tr.point_delta.assign(n_point, Mat<T>());
    for (std::size_t i = n_point; i-- > 0;) {
      nn::leaky_relu_backward_inplace(dh, tr.point_pre[i], slope);
      if (grad) {
        grad->point_w[i].noalias() += weight * (tr.point_in[i].transpose() * dh);
        grad->point_b[i] += weight * dh.colwise().sum();
      }
      Mat<T> next = dh * params_.point_w[i].transpose();
      tr.point_delta[i] = std::move(dh);
      dh = std::move(next);
    }
    if (input_grad) *input_grad = std::move(dh);
  }

  /// grad_W += coef * (tangent of layer input)^T * delta for the input tangent `v`.
  void tangent_weight_gradient(const Trace& tr, const Mat<T>& v, T coef, Params& grad) const {
    const T slope = static_cast<T>(cfg_.leaky_slope);
    Mat<T> t = v;
    for (std::size_t i = 0; i < params_.point_w.size(); ++i) {
      grad.point_w[i].noalias() += coef * (t.transpose() * tr.point_delta[i]);
      Mat<T> nt = t * params_.point_w[i];
      nn::leaky_relu_backward_inplace(nt, tr.point_pre[i], slope);
      t = std::move(nt);
    }
    Mat<T> tp(1, t.cols());
    for (Index k = 0; k < t.cols(); ++k) tp(0, k) = t(tr.argmax(k), k);
    const std::size_t n_head = params_.head_w.size();
    for (std::size_t i = 0; i < n_head; ++i) {
      grad.head_w[i].noalias() += coef * (tp.transpose() * tr.head_delta[i]);
      Mat<T> nt = tp * params_.head_w[i];
      if (i + 1 != n_head) nn::leaky_relu_backward_inplace(nt, tr.head_pre[i], slope);
      tp = std::move(nt);
    }
  }

  CriticConfig cfg_;
  Params params_;
};

/// D(x) = <w, x> + c over the flattened cloud. Used for closed-form checks of the
/// adversarial losses; exposes the same interface as PointCritic.
template <class T>
class LinearCritic {
 public:
  struct Params {
    Mat<T> w;  ///< N x 3
    Mat<T> c;  ///< 1 x 1

    template <class F>
    void for_each(F&& f) {
      f("linear.w", w);
      f("linear.c", c);
    }
    template <class F>
    void for_each(F&& f) const {
      f("linear.w", w);
      f("linear.c", c);
    }
  };

  explicit LinearCritic(Params p) : params_(std::move(p)) {}

  Params& params() { return params_; }
  const Params& params() const { return params_; }

  T score(const Mat<T>& cloud) const {
    check(cloud);
    return params_.w.cwiseProduct(cloud).sum() + params_.c(0, 0);
  }

  CriticEvaluation<T> evaluate(const Mat<T>& cloud) const { return {score(cloud), params_.w}; }

  T accumulate_score_gradient(const Mat<T>& cloud, T weight, Params& grad) const {
    grad.w += weight * cloud;
    grad.c(0, 0) += weight;
    return score(cloud);
  }

  T gradient_penalty(const Mat<T>& x_hat, T weight, Params* grad) const {
    check(x_hat);
    const T norm = params_.w.norm();
    if (grad && norm > T(0)) grad->w += weight * T(2) * (norm - T(1)) / norm * params_.w;
    return (norm - T(1)) * (norm - T(1));
  }

 private:
  void check(const Mat<T>& cloud) const {
    if (cloud.rows() != params_.w.rows() || cloud.cols() != 3)
      throw InvalidInput("linear critic: cloud shape does not match weights");
  }
  Params params_;
};

/// x_hat = u * real + (1 - u) * fake.
template <class T>
Mat<T> interpolate_clouds(const Mat<T>& real, const Mat<T>& fake, T u) {
  if (real.rows() != fake.rows() || real.cols() != fake.cols())
    throw InvalidInput("gradient penalty: real and fake clouds must have equal counts");
  return u * real + (T(1) - u) * fake;
}

/// (||grad_x D(x_hat)||_2 - 1)^2 at x_hat = u * real + (1 - u) * fake, the norm taken over
/// all 3N coordinates.
template <class Critic, class T>
T gradient_penalty(const Mat<T>& real, const Mat<T>& fake, const Critic& critic, T u) {
  return critic.gradient_penalty(interpolate_clouds(real, fake, u), T(0), nullptr);
}

}  // namespace bpcgen
