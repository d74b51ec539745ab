// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bpcgen/error.hpp"
#include "bpcgen/metrics/chamfer.hpp"
#include "bpcgen/model/critic.hpp"
#include "bpcgen/model/encoder.hpp"
#include "bpcgen/model/tree_generator.hpp"

namespace bpcgen {

template <class T>
struct EgLoss {
  T loss{};
  T kl{};           ///< batch mean
  T cd{};           ///< batch mean
  T critic_mean{};  ///< mean D(G(z)); 0 when no critic is used
  EncoderParams<T> encoder_grad;
  GeneratorParams<T> generator_grad;
};

/// Encoder+generator objective over a batch:
///   L = lambda1 * mean KL + lambda2 * mean CD(G(z), target) - mean D(G(z)),
/// with z = mean + std * noise. Gradients are produced for the encoder and generator only.
/// `critic` may be null, which drops the adversarial term.
template <class T, class Critic>
EgLoss<T> loss_eg(const Encoder<T>& encoder, const TreeGenerator<T>& generator, const Critic* critic,
                  const std::vector<Mat<T>>& inputs, const std::vector<Points3>& targets,
                  const std::vector<Mat<T>>& noises, T lambda1, T lambda2) {
  const std::size_t b = inputs.size();
  if (b == 0 || targets.size() != b || noises.size() != b)
    throw InvalidInput("loss_eg: inputs, targets and noises must be nonempty and equally sized");
  EgLoss<T> out;
  out.encoder_grad = nn::zeros_like(encoder.params());
  out.generator_grad = nn::zeros_like(generator.params());
  const T inv_b = T(1) / static_cast<T>(b);
  double kl_sum = 0, cd_sum = 0, d_sum = 0;

  for (std::size_t i = 0; i < b; ++i) {
    EncoderTrace<T> etr;
    const GaussianPosterior<T> post = encoder.forward(inputs[i], &etr);
    const Mat<T> z = reparameterize(post, noises[i]);
    GeneratorTrace<T> gtr;
    const Mat<T> pred = generator.forward(z, &gtr);
    if (targets[i].cols() != 3 || targets[i].rows() == 0) throw InvalidInput("loss_eg: target must be a nonempty N x 3 cloud");

    Mat<T> d_cd;
    const double cd = chamfer_with_gradient(pred, targets[i], d_cd);
    Mat<T> d_out = (lambda2 * inv_b) * d_cd;
    if (critic) {
      const CriticEvaluation<T> ev = critic->evaluate(pred);
      d_out -= inv_b * ev.input_grad;
      d_sum += static_cast<double>(ev.score);
    }
    const Mat<T> dz = generator.backward(gtr, d_out, out.generator_grad);

    Mat<T> d_mean, d_hlv;
    kl_divergence_gradient(post, d_mean, d_hlv);
    d_mean *= lambda1 * inv_b;
    d_hlv *= lambda1 * inv_b;
    d_mean += dz;
    // z = mean + exp(h) * noise, so dz/dh = std * noise.
    d_hlv += dz.cwiseProduct(post.std).cwiseProduct(noises[i]);
    encoder.backward(etr, d_mean, d_hlv, out.encoder_grad);

    kl_sum += static_cast<double>(kl_divergence(post));
    cd_sum += cd;
  }
  out.kl = static_cast<T>(kl_sum / static_cast<double>(b));
  out.cd = static_cast<T>(cd_sum / static_cast<double>(b));
  out.critic_mean = static_cast<T>(d_sum / static_cast<double>(b));
  out.loss = lambda1 * out.kl + lambda2 * out.cd - out.critic_mean;
  if (!std::isfinite(static_cast<double>(out.loss))) throw NumericFailure("loss_eg: non-finite loss");
  return out;
}

template <class T, class Critic>
struct DLoss {
  T loss{};
  T fake_mean{};
  T real_mean{};
  T penalty_mean{};
  typename Critic::Params grad;
};

/// Critic objective: L = mean D(fake) - mean D(real) + lambda_gp * mean (||grad D(x_hat)|| - 1)^2
/// with x_hat = u * real + (1 - u) * fake. Fakes are constants; only critic gradients are produced.
template <class T, class Critic>
DLoss<T, Critic> loss_d(const Critic& critic, const std::vector<Mat<T>>& reals, const std::vector<Mat<T>>& fakes,
                        const std::vector<T>& us, T lambda_gp) {
  const std::size_t b = reals.size();
  if (b == 0 || fakes.size() != b || us.size() != b)
    throw InvalidInput("loss_d: reals, fakes and u draws must be nonempty and equally sized");
  DLoss<T, Critic> out;
  out.grad = nn::zeros_like(critic.params());
  const T inv_b = T(1) / static_cast<T>(b);
  double fake_sum = 0, real_sum = 0, gp_sum = 0;
  for (std::size_t i = 0; i < b; ++i) {
    fake_sum += static_cast<double>(critic.accumulate_score_gradient(fakes[i], inv_b, out.grad));
    real_sum += static_cast<double>(critic.accumulate_score_gradient(reals[i], -inv_b, out.grad));
    const Mat<T> x_hat = interpolate_clouds(reals[i], fakes[i], us[i]);
    gp_sum += static_cast<double>(critic.gradient_penalty(x_hat, lambda_gp * inv_b, &out.grad));
  }
  out.fake_mean = static_cast<T>(fake_sum / static_cast<double>(b));
  out.real_mean = static_cast<T>(real_sum / static_cast<double>(b));
  out.penalty_mean = static_cast<T>(gp_sum / static_cast<double>(b));
  out.loss = out.fake_mean - out.real_mean + lambda_gp * out.penalty_mean;
  if (!std::isfinite(static_cast<double>(out.loss))) throw NumericFailure("loss_d: non-finite loss");
  return out;
}

}  // namespace bpcgen
