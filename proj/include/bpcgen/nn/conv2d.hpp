// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <string>

#include "bpcgen/error.hpp"
#include "bpcgen/nn/tensor.hpp"

namespace bpcgen::nn {

/// C x (H*W) activations, channel-major.
template <class T>
struct FeatureMap {
  Mat<T> data;
  int height = 0;
  int width = 0;

  int channels() const { return static_cast<int>(data.rows()); }
};

/// Square-kernel convolution. weight is C_out x (C_in*k*k), bias is C_out x 1.
template <class T>
struct Conv2dParams {
  Mat<T> weight;
  Mat<T> bias;

  static Conv2dParams make(int in_ch, int out_ch, int kernel, std::mt19937_64& rng) {
    Conv2dParams p;
    p.weight.resize(out_ch, in_ch * kernel * kernel);
    init_uniform(p.weight, in_ch * kernel * kernel, rng);
    p.bias = Mat<T>::Zero(out_ch, 1);
    return p;
  }

  int out_channels() const { return static_cast<int>(weight.rows()); }
};

struct ConvGeometry {
  int kernel = 3;
  int stride = 1;
  int pad = 1;

  int out_size(int n) const { return (n + 2 * pad - kernel) / stride + 1; }
};

template <class T>
Mat<T> im2col(const FeatureMap<T>& x, const ConvGeometry& g) {
  const int ho = g.out_size(x.height), wo = g.out_size(x.width);
  const int k = g.kernel;
  Mat<T> cols = Mat<T>::Zero(x.channels() * k * k, ho * wo);
  for (int c = 0; c < x.channels(); ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const int row = (c * k + ky) * k + kx;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= x.height) continue;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix < 0 || ix >= x.width) continue;
            cols(row, oy * wo + ox) = x.data(c, iy * x.width + ix);
          }
        }
      }
  return cols;
}

/// Adjoint of im2col.
template <class T>
FeatureMap<T> col2im(const Mat<T>& cols, int channels, int height, int width, const ConvGeometry& g) {
  const int ho = g.out_size(height), wo = g.out_size(width);
  const int k = g.kernel;
  FeatureMap<T> x{Mat<T>::Zero(channels, height * width), height, width};
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const int row = (c * k + ky) * k + kx;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= height) continue;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix < 0 || ix >= width) continue;
            x.data(c, iy * width + ix) += cols(row, oy * wo + ox);
          }
        }
      }
  return x;
}

/// Forward pass; `cols` receives the unfolded input for reuse in backward.
template <class T>
FeatureMap<T> conv2d_forward(const FeatureMap<T>& x, const Conv2dParams<T>& p, const ConvGeometry& g,
                             Mat<T>& cols) {
  if (p.weight.cols() != x.channels() * g.kernel * g.kernel)
    throw ConfigError("conv2d: weight shape does not match input channels");
  cols = im2col(x, g);
  FeatureMap<T> y{p.weight * cols, g.out_size(x.height), g.out_size(x.width)};
  y.data.colwise() += p.bias.col(0);
  return y;
}

/// Accumulates parameter gradients into `grad`; returns d loss / d input.
template <class T>
FeatureMap<T> conv2d_backward(const Mat<T>& dy, const Mat<T>& cols, const Conv2dParams<T>& p,
                              const ConvGeometry& g, int in_channels, int in_h, int in_w,
                              Conv2dParams<T>& grad) {
  grad.weight.noalias() += dy * cols.transpose();
  grad.bias.col(0) += dy.rowwise().sum();
  const Mat<T> dcols = p.weight.transpose() * dy;
  return col2im(dcols, in_channels, in_h, in_w, g);
}

}  // namespace bpcgen::nn
