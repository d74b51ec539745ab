// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bpcgen/error.hpp"
#include "bpcgen/model/tree_generator.hpp"
#include "bpcgen/nn/conv2d.hpp"
#include "bpcgen/nn/tensor.hpp"

namespace bpcgen {

enum class SlicePlane { axial, coronal, sagittal };

inline const char* to_string(SlicePlane p) {
  switch (p) {
    case SlicePlane::axial: return "axial";
    case SlicePlane::coronal: return "coronal";
    case SlicePlane::sagittal: return "sagittal";
  }
  return "?";
}

inline SlicePlane slice_plane_from_string(const std::string& s) {
  if (s == "axial") return SlicePlane::axial;
  if (s == "coronal") return SlicePlane::coronal;
  if (s == "sagittal") return SlicePlane::sagittal;
  throw InvalidInput("unknown slice plane '" + s + "'");
}

/// H x W grayscale image with values in [0,1].
struct SliceImage {
  Eigen::MatrixXd pixels;
  SlicePlane plane = SlicePlane::axial;

  void validate() const {
    if (pixels.rows() < 8 || pixels.cols() < 8) throw InvalidInput("slice image must be at least 8x8");
    if (!pixels.allFinite() || pixels.minCoeff() < 0.0 || pixels.maxCoeff() > 1.0)
      throw InvalidInput("slice pixels must lie in [0,1]");
  }
};

/// Bilinear resampling with pixel-center alignment (edge pixels clamped).
inline Eigen::MatrixXd resample_bilinear(const Eigen::MatrixXd& src, int out_h, int out_w) {
  const int in_h = static_cast<int>(src.rows()), in_w = static_cast<int>(src.cols());
  Eigen::MatrixXd out(out_h, out_w);
  const double sy = static_cast<double>(in_h) / out_h, sx = static_cast<double>(in_w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(in_h - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, in_h - 1);
    const double ty = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(in_w - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, in_w - 1);
      const double tx = fx - x0;
      out(y, x) = (1 - ty) * ((1 - tx) * src(y0, x0) + tx * src(y0, x1)) +
                  ty * ((1 - tx) * src(y1, x0) + tx * src(y1, x1));
    }
  }
  return out;
}

/// Residual image encoder: residual stages of two 3x3 convolutions, stride-2 downsampling
/// between stages, global average pooling, then affine heads for the mean and the
/// half-log-variance of a diagonal Gaussian.
struct EncoderConfig {
  int input_height = 96;
  int input_width = 112;
  std::vector<int> channels{32, 64, 128, 256};
  int latent_dim = kLatentDim;
  double leaky_slope = 0.2;

  void validate() const {
    if (input_height < 8 || input_width < 8) throw ConfigError("encoder: input size must be at least 8x8");
    if (channels.empty()) throw ConfigError("encoder: at least one stage is required");
    for (int c : channels)
      if (c < 1) throw ConfigError("encoder: channel widths must be positive");
    if (latent_dim != kLatentDim) throw ConfigError("encoder: latent_dim must be " + std::to_string(kLatentDim));
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ConfigError("encoder: leaky_slope must lie in (0,1)");
  }
};

template <class T>
struct ResidualBlockParams {
  nn::Conv2dParams<T> conv1;
  nn::Conv2dParams<T> conv2;
  nn::Conv2dParams<T> shortcut;  ///< 1x1 projection; empty when the block keeps its shape
};

template <class T>
struct EncoderParams {
  std::vector<ResidualBlockParams<T>> blocks;
  Mat<T> mean_w, mean_b;  ///< C x 96, 1 x 96
  Mat<T> hlv_w, hlv_b;    ///< half-log-variance head

  template <class F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <class F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

  static EncoderParams make(const EncoderConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    EncoderParams p;
    int in_ch = 1;
    for (std::size_t s = 0; s < cfg.channels.size(); ++s) {
      const int out_ch = cfg.channels[s];
      ResidualBlockParams<T> b;
      b.conv1 = nn::Conv2dParams<T>::make(in_ch, out_ch, 3, rng);
      b.conv2 = nn::Conv2dParams<T>::make(out_ch, out_ch, 3, rng);
      if (in_ch != out_ch || s > 0) b.shortcut = nn::Conv2dParams<T>::make(in_ch, out_ch, 1, rng);
      p.blocks.push_back(std::move(b));
      in_ch = out_ch;
    }
    p.mean_w.resize(in_ch, cfg.latent_dim);
    nn::init_uniform(p.mean_w, in_ch, rng);
    p.mean_b = Mat<T>::Zero(1, cfg.latent_dim);
    p.hlv_w.resize(in_ch, cfg.latent_dim);
    nn::init_uniform(p.hlv_w, in_ch, rng);
    p.hlv_b = Mat<T>::Zero(1, cfg.latent_dim);
    return p;
  }

 private:
  template <class Self, class F>
  static void visit(Self& s, F& f) {
    for (std::size_t i = 0; i < s.blocks.size(); ++i) {
      const std::string pre = "enc.block" + std::to_string(i) + ".";
      f(pre + "conv1.weight", s.blocks[i].conv1.weight);
      f(pre + "conv1.bias", s.blocks[i].conv1.bias);
      f(pre + "conv2.weight", s.blocks[i].conv2.weight);
      f(pre + "conv2.bias", s.blocks[i].conv2.bias);
      f(pre + "shortcut.weight", s.blocks[i].shortcut.weight);
      f(pre + "shortcut.bias", s.blocks[i].shortcut.bias);
    }
    f("enc.mean.weight", s.mean_w);
    f("enc.mean.bias", s.mean_b);
    f("enc.hlv.weight", s.hlv_w);
    f("enc.hlv.bias", s.hlv_b);
  }
};

/// Diagonal Gaussian N(mean, std^2) over the latent space.
template <class T>
struct GaussianPosterior {
  Mat<T> mean;  ///< 1 x 96
  Mat<T> std;   ///< 1 x 96, strictly positive

  void validate() const {
    if (mean.rows() != 1 || std.rows() != 1 || mean.cols() != std.cols())
      throw InvalidInput("posterior: mean and std must be matching row vectors");
    if (!mean.allFinite() || !std.allFinite() || (std.array() <= T(0)).any())
      throw InvalidInput("posterior: std must be finite and positive");
  }
};

/// z = mean + std * noise.
template <class T>
Mat<T> reparameterize(const GaussianPosterior<T>& post, const Mat<T>& noise) {
  if (noise.rows() != 1 || noise.cols() != post.mean.cols())
    throw InvalidInput("reparameterize: noise has the wrong size");
  return post.mean + post.std.cwiseProduct(noise);
}

/// KL(N(mean, diag std^2) || N(0, I)) = 1/2 sum(mean^2 + std^2 - 1 - ln std^2).
template <class T>
T kl_divergence(const GaussianPosterior<T>& post) {
  const auto var = post.std.array().square();
  return T(0.5) * (post.mean.array().square() + var - T(1) - var.log()).sum();
}

/// Gradients of kl_divergence with respect to the mean and the half-log-variance h
/// (std = exp(h)).
template <class T>
void kl_divergence_gradient(const GaussianPosterior<T>& post, Mat<T>& d_mean, Mat<T>& d_half_log_var) {
  d_mean = post.mean;
  d_half_log_var = (post.std.array().square() - T(1)).matrix();
}

template <class T>
struct EncoderTrace {
  struct Block {
    nn::FeatureMap<T> input;
    Mat<T> cols1, pre1, cols2, cols_sc, pre_out;
    int mid_h = 0, mid_w = 0;
  };
  std::vector<Block> blocks;
  nn::FeatureMap<T> last;
  Mat<T> pooled;  ///< 1 x C
  Mat<T> half_log_var;
};

template <class T>
class Encoder {
 public:
  Encoder(EncoderConfig cfg, EncoderParams<T> params) : cfg_(std::move(cfg)), params_(std::move(params)) {
    cfg_.validate();
    if (params_.blocks.size() != cfg_.channels.size()) throw ConfigError("encoder: block count mismatch");
  }
  Encoder(EncoderConfig cfg, std::mt19937_64& rng) : Encoder(cfg, EncoderParams<T>::make(cfg, rng)) {}

  const EncoderConfig& config() const { return cfg_; }
  EncoderParams<T>& params() { return params_; }
  const EncoderParams<T>& params() const { return params_; }

  /// Resamples a slice to the network input size: 1 x (H*W) channel-major.
  Mat<T> prepare_input(const SliceImage& image) const {
    image.validate();
    const Eigen::MatrixXd r = resample_bilinear(image.pixels, cfg_.input_height, cfg_.input_width);
    Mat<T> x(1, static_cast<Index>(cfg_.input_height) * cfg_.input_width);
    for (int y = 0; y < cfg_.input_height; ++y)
      for (int xx = 0; xx < cfg_.input_width; ++xx) x(0, y * cfg_.input_width + xx) = static_cast<T>(r(y, xx));
    return x;
  }

  GaussianPosterior<T> encode(const SliceImage& image) const { return forward(prepare_input(image)); }

  /// `input` as returned by prepare_input.
  GaussianPosterior<T> forward(const Mat<T>& input, EncoderTrace<T>* trace = nullptr) const {
    if (input.rows() != 1 || input.cols() != static_cast<Index>(cfg_.input_height) * cfg_.input_width)
      throw InvalidInput("encoder: input has the wrong size");
    EncoderTrace<T> local;
    EncoderTrace<T>& tr = trace ? *trace : local;
    tr.blocks.clear();
    const T slope = static_cast<T>(cfg_.leaky_slope);
    nn::FeatureMap<T> x{input, cfg_.input_height, cfg_.input_width};
    for (std::size_t s = 0; s < params_.blocks.size(); ++s) {
      const auto& bp = params_.blocks[s];
      typename EncoderTrace<T>::Block b;
      b.input = x;
      const nn::ConvGeometry g1{3, s == 0 ? 1 : 2, 1};
      nn::FeatureMap<T> h = nn::conv2d_forward(x, bp.conv1, g1, b.cols1);
      b.pre1 = h.data;
      nn::leaky_relu_inplace(h.data, slope);
      b.mid_h = h.height;
      b.mid_w = h.width;
      nn::FeatureMap<T> y = nn::conv2d_forward(h, bp.conv2, nn::ConvGeometry{3, 1, 1}, b.cols2);
      if (bp.shortcut.weight.size() > 0) {
        const nn::FeatureMap<T> sc = nn::conv2d_forward(x, bp.shortcut, nn::ConvGeometry{1, g1.stride, 0}, b.cols_sc);
        y.data += sc.data;
      } else {
        y.data += x.data;
      }
      b.pre_out = y.data;
      nn::leaky_relu_inplace(y.data, slope);
      tr.blocks.push_back(std::move(b));
      x = std::move(y);
    }
    tr.last = x;
    tr.pooled = x.data.rowwise().mean().transpose();
    GaussianPosterior<T> post;
    post.mean = tr.pooled * params_.mean_w + params_.mean_b;
    tr.half_log_var = tr.pooled * params_.hlv_w + params_.hlv_b;
    post.std = tr.half_log_var.array().exp().matrix();
    if (!post.mean.allFinite() || !post.std.allFinite() || (post.std.array() <= T(0)).any())
      throw NumericFailure("encoder: non-finite posterior");
    return post;
  }

  /// Accumulates parameter gradients given d loss / d mean and d loss / d half-log-variance.
  void backward(const EncoderTrace<T>& tr, const Mat<T>& d_mean, const Mat<T>& d_hlv, EncoderParams<T>& grad) const {
    const T slope = static_cast<T>(cfg_.leaky_slope);
    grad.mean_w.noalias() += tr.pooled.transpose() * d_mean;
    grad.mean_b += d_mean;
    grad.hlv_w.noalias() += tr.pooled.transpose() * d_hlv;
    grad.hlv_b += d_hlv;
    const Mat<T> d_pooled = d_mean * params_.mean_w.transpose() + d_hlv * params_.hlv_w.transpose();
    const T inv_hw = T(1) / static_cast<T>(tr.last.data.cols());
    Mat<T> d_x = (d_pooled.transpose() * inv_hw).replicate(1, tr.last.data.cols());

    for (std::size_t s = params_.blocks.size(); s-- > 0;) {
      const auto& bp = params_.blocks[s];
      auto& gb = grad.blocks[s];
      const auto& b = tr.blocks[s];
      const int stride = s == 0 ? 1 : 2;
      Mat<T> d_pre = std::move(d_x);
      nn::leaky_relu_backward_inplace(d_pre, b.pre_out, slope);
      nn::FeatureMap<T> d_h = nn::conv2d_backward(d_pre, b.cols2, bp.conv2, nn::ConvGeometry{3, 1, 1},
                                                  bp.conv2.weight.cols() / 9, b.mid_h, b.mid_w, gb.conv2);
      nn::leaky_relu_backward_inplace(d_h.data, b.pre1, slope);
      const int in_ch = b.input.channels();
      nn::FeatureMap<T> d_in = nn::conv2d_backward(d_h.data, b.cols1, bp.conv1, nn::ConvGeometry{3, stride, 1}, in_ch,
                                                   b.input.height, b.input.width, gb.conv1);
      if (bp.shortcut.weight.size() > 0) {
        d_in.data += nn::conv2d_backward(d_pre, b.cols_sc, bp.shortcut, nn::ConvGeometry{1, stride, 0}, in_ch,
                                         b.input.height, b.input.width, gb.shortcut)
                         .data;
      } else {
        d_in.data += d_pre;
      }
      d_x = std::move(d_in.data);
    }
  }

 private:
  EncoderConfig cfg_;
  EncoderParams<T> params_;
};

}  // namespace bpcgen
