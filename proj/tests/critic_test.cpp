// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "support.hpp"

using namespace bpcgen;
using test::random_mat;

namespace {

CriticConfig small_config() {
  CriticConfig c;
  c.point_widths = {3, 16, 24};
  c.head_widths = {24, 8, 1};
  return c;
}

PointCritic<double> random_critic(std::mt19937_64& rng) {
  PointCritic<double> d(small_config(), rng);
  d.params().for_each([&](const std::string&, Mat<double>& m) {
    if (m.rows() == 1) m = random_mat<double>(1, m.cols(), rng, 0.1);
  });
  return d;
}

Mat<double> shuffled_rows(const Mat<double>& m, std::mt19937_64& rng) {
  std::vector<Index> idx(static_cast<std::size_t>(m.rows()));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  Mat<double> out(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i) out.row(i) = m.row(idx[static_cast<std::size_t>(i)]);
  return out;
}

LinearCritic<double> linear(Index n, double norm, std::mt19937_64& rng) {
  Mat<double> w = random_mat<double>(n, 3, rng);
  w *= norm / w.norm();
  return LinearCritic<double>({w, Mat<double>::Constant(1, 1, 0.3)});
}

// Fraction of parameter entries whose analytic derivative matches a central difference.
template <class Grad, class Loss>
double fd_agreement(PointCritic<double>& d, Grad& grad, Loss&& loss, double tol) {
  std::vector<Mat<double>*> ps, gs;
  nn::collect_params(d.params(), ps);
  nn::collect_params(grad, gs);
  std::size_t good = 0, total = 0;
  for (std::size_t t = 0; t < ps.size(); ++t)
    for (Index i = 0; i < ps[t]->size(); ++i) {
      ++total;
      const double fd = oracle::central_difference(loss, ps[t]->data() + i, 1e-6);
      if (test::rel_err(gs[t]->data()[i], fd, 1e-7) <= tol) ++good;
    }
  return static_cast<double>(good) / static_cast<double>(total);
}

}  // namespace

TEST(Critic, PermutationInvariantBitExact) {
  std::mt19937_64 rng(1);
  const auto d = random_critic(rng);
  for (int t = 0; t < 20; ++t) {
    const Mat<double> x = random_mat<double>(50, 3, rng);
    EXPECT_EQ(d.score(x), d.score(shuffled_rows(x, rng)));
  }
}

TEST(Critic, ZeroParamsScoreZero) {
  std::mt19937_64 rng(2);
  PointCritic<double> d(small_config(), rng);
  d.params().for_each([](const std::string&, Mat<double>& m) { m.setZero(); });
  EXPECT_EQ(d.score(random_mat<double>(30, 3, rng)), 0.0);
}

TEST(Critic, MatchesDenseOracle) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 30; ++t) {
    const auto d = random_critic(rng);
    const Mat<double> x = random_mat<double>(1 + t * 3, 3, rng);
    EXPECT_NEAR(d.score(x), oracle::critic_dense(d.params(), x, 0.2), 1e-12);
  }
}

TEST(Critic, InputGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  const auto d = random_critic(rng);
  Mat<double> x = random_mat<double>(12, 3, rng);
  const auto ev = d.evaluate(x);
  std::size_t good = 0;
  for (Index i = 0; i < x.size(); ++i) {
    const double fd = oracle::central_difference([&] { return d.score(x); }, x.data() + i, 1e-6);
    if (test::rel_err(ev.input_grad.data()[i], fd, 1e-7) <= 1e-6) ++good;
  }
  EXPECT_GE(good, static_cast<std::size_t>(x.size()) - 1);
}

TEST(Critic, ScoreGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  auto d = random_critic(rng);
  const Mat<double> x = random_mat<double>(10, 3, rng);
  auto grad = nn::zeros_like(d.params());
  d.accumulate_score_gradient(x, 1.0, grad);
  EXPECT_GE(fd_agreement(d, grad, [&] { return d.score(x); }, 1e-5), 0.99);
}

TEST(GradientPenalty, NormMatchesFiniteDifferenceGradient) {
  std::mt19937_64 rng(6);
  const auto d = random_critic(rng);
  const Mat<double> real = random_mat<double>(9, 3, rng), fake = random_mat<double>(9, 3, rng);
  const double u = 0.37;
  Mat<double> xh = interpolate_clouds(real, fake, u);
  double sq = 0;
  for (Index i = 0; i < xh.size(); ++i) {
    const double g = oracle::central_difference([&] { return d.score(xh); }, xh.data() + i, 1e-6);
    sq += g * g;
  }
  const double expect = (std::sqrt(sq) - 1) * (std::sqrt(sq) - 1);
  EXPECT_LE(test::rel_err(gradient_penalty(real, fake, d, u), expect, 1e-8), 1e-5);
}

TEST(GradientPenalty, ParameterGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  auto d = random_critic(rng);
  const Mat<double> xh = random_mat<double>(8, 3, rng);
  auto grad = nn::zeros_like(d.params());
  d.gradient_penalty(xh, 1.0, &grad);
  EXPECT_GE(fd_agreement(d, grad, [&] { return d.gradient_penalty(xh, 0.0, nullptr); }, 1e-4), 0.99);
}

TEST(GradientPenalty, LinearCriticClosedForm) {
  std::mt19937_64 rng(8);
  const Mat<double> real = random_mat<double>(6, 3, rng), fake = random_mat<double>(6, 3, rng);
  for (double u : {0.0, 0.5, 1.0}) {
    EXPECT_NEAR(gradient_penalty(real, fake, linear(6, 1.0, rng), u), 0.0, 1e-24);
    EXPECT_NEAR(gradient_penalty(real, fake, linear(6, 3.0, rng), u), 4.0, 1e-12);
  }
}

TEST(GradientPenalty, InterpolationEndpoints) {
  std::mt19937_64 rng(9);
  const Mat<double> real = random_mat<double>(7, 3, rng), fake = random_mat<double>(7, 3, rng);
  EXPECT_EQ(interpolate_clouds(real, fake, 1.0), real);
  EXPECT_EQ(interpolate_clouds(real, fake, 0.0), fake);
  const auto d = random_critic(rng);
  EXPECT_EQ(gradient_penalty(real, fake, d, 1.0), d.gradient_penalty(real, 0.0, nullptr));
  EXPECT_EQ(gradient_penalty(real, fake, d, 0.0), d.gradient_penalty(fake, 0.0, nullptr));
  EXPECT_THROW(interpolate_clouds(real, Mat<double>(random_mat<double>(6, 3, rng)), 0.5), InvalidInput);
}

TEST(Critic, RejectsBadConfigAndInput) {
  std::mt19937_64 rng(10);
  CriticConfig c = small_config();
  c.head_widths.back() = 2;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.head_widths.front() = 7;
  EXPECT_THROW(c.validate(), ConfigError);
  const auto d = random_critic(rng);
  EXPECT_THROW(d.score(Mat<double>(4, 2)), InvalidInput);
}
