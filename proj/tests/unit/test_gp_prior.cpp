#include "nllvm/densities.hpp"
#include "nllvm/errors.hpp"
#include "nllvm/gp_prior.hpp"

#include <boost/math/distributions/gamma.hpp>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace nllvm;

TEST(GPConfig, Validation)
{
  GPPriorConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.jitter = 1e-5;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg = GPPriorConfig{};
  cfg.a_sigma = 0.0;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg = GPPriorConfig{};
  cfg.rescale = RescaleDist::gamma(0.0, 1.0);
  EXPECT_THROW(cfg.validate(), ParameterError);
}

TEST(Rescale, FixedIsDegenerate)
{
  GPPriorConfig cfg;
  cfg.rescale = RescaleDist::fixed(2.0);
  Rng rng(1);
  EXPECT_EQ(sample_rescale(cfg, rng), 2.0);
}

TEST(Rescale, GammaMeanAndSupport)
{
  GPPriorConfig cfg;
  cfg.rescale = RescaleDist::gamma(2.0, 1.0);
  Rng rng(2);
  double sum = 0.0;
  std::size_t nonpositive = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    double a = sample_rescale(cfg, rng);
    sum += a;
    nonpositive += a <= 0.0;
  }
  EXPECT_NEAR(sum / n, 2.0, 0.05);
  EXPECT_EQ(nonpositive, 0u);
}

TEST(Path, LargeRescaleDecorrelates)
{
  GPPriorConfig cfg;
  GPPathSampler sampler(cfg, 1e3, 64);
  Rng rng(3);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (int d = 0; d < 1000; ++d) {
    auto p = sampler.draw(rng);
    for (std::size_t i = 0; i + 1 < p.values.size(); ++i) {
      sxy += p.values[i] * p.values[i + 1];
      sxx += p.values[i] * p.values[i];
      syy += p.values[i + 1] * p.values[i + 1];
    }
  }
  EXPECT_LT(std::abs(sxy / std::sqrt(sxx * syy)), 0.2);
}

TEST(Path, TinyRescaleIsNearlyConstant)
{
  GPPriorConfig cfg;
  cfg.variance = 4.0;
  cfg.jitter = 1e-8 * cfg.variance;
  Rng rng(4);
  auto p = sample_path(cfg, 1e-6, 128, rng);
  double m = 0.0, s = 0.0;
  for (double v : p.values)
    m += v - p.values[0];
  m /= static_cast<double>(p.values.size());
  for (double v : p.values)
    s += (v - p.values[0] - m) * (v - p.values[0] - m);
  s = std::sqrt(s / static_cast<double>(p.values.size()));
  EXPECT_LT(s, 1e-2 * std::sqrt(cfg.variance));
}

TEST(Path, MarginalVariance)
{
  GPPriorConfig cfg;
  cfg.variance = 2.5;
  cfg.jitter = 1e-8 * cfg.variance;
  GPPathSampler sampler(cfg, 5.0, 32);
  Rng rng(5);
  double s = 0.0, s2 = 0.0;
  const int n = 10000;
  for (int d = 0; d < n; ++d) {
    double v = sampler.draw(rng).values[13];
    s += v;
    s2 += v * v;
  }
  double var = s2 / n - (s / n) * (s / n);
  EXPECT_NEAR(var / cfg.variance, 1.0, 0.05);
}

TEST(Path, DeterministicAndRangeChecked)
{
  GPPriorConfig cfg;
  Rng a(9), b(9);
  EXPECT_EQ(sample_path(cfg, 3.0, 50, a).values, sample_path(cfg, 3.0, 50, b).values);
  EXPECT_THROW(sample_path(cfg, 3.0, 8, a), ParameterError);
  EXPECT_THROW(sample_path(cfg, 3.0, 2048, a), ParameterError);
}

TEST(Path, CholeskyFailureIsConditioningError)
{
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(jittered_cholesky(m, 1e-8), ConditioningError);
}

TEST(Sigma, InverseGammaMeanMedianSupport)
{
  GPPriorConfig cfg;
  cfg.a_sigma = 3.0;
  cfg.b_sigma = 1.0;
  Rng rng(6);
  const int n = 100000;
  std::vector<double> xs(n);
  double sum = 0.0;
  for (auto& x : xs) {
    x = sample_sigma(cfg, rng);
    sum += x;
    ASSERT_GT(x, 0.0);
  }
  EXPECT_NEAR(sum / n / 0.5, 1.0, 0.02);
  std::nth_element(xs.begin(), xs.begin() + n / 2, xs.end());
  // Median of 1/X with X ~ Gamma(a, rate b).
  boost::math::gamma_distribution<double> g(cfg.a_sigma, 1.0 / cfg.b_sigma);
  double median = 1.0 / boost::math::quantile(g, 0.5);
  EXPECT_NEAR(xs[n / 2] / median, 1.0, 0.02);
}

TEST(PriorDraw, ValidDeterministicAndBoundedL1)
{
  GPPriorConfig cfg;
  cfg.rescale = RescaleDist::gamma(2.0, 0.5);
  cfg.a_sigma = 5.0;
  cfg.b_sigma = 1.0;
  Grid g(-12.0, 12.0, 2048);
  Rng a(10), b(10);
  auto d1 = prior_draw_density(cfg, g, a);
  auto d2 = prior_draw_density(cfg, g, b);
  for (std::size_t i = 0; i < g.n; ++i)
    ASSERT_EQ(d1[i], d2[i]);

  std::vector<GridDensity> draws;
  Rng rng(11);
  for (int i = 0; i < 100; ++i)
    draws.push_back(prior_draw_density(cfg, g, rng));
  for (std::size_t i = 0; i < draws.size(); ++i)
    for (std::size_t j = i + 1; j < draws.size(); j += 7)
      EXPECT_LE(divergence(DivergenceKind::l1(), draws[i], draws[j]), 2.0 + 1e-8);
}

TEST(SupportProbe, ConditionalConstructionIsPositive)
{
  GPPriorConfig cfg;
  Grid g(-1.5, 2.5, 2048);
  auto target = quantile_of(cinf_bump(g), 256, 1e-2);
  Rng rng(12);
  for (double delta : { 0.3, 0.1 }) {
    auto probe = support_probe(cfg, target, delta, 10000, rng);
    EXPECT_TRUE(probe.positive) << "delta=" << delta << " interp=" << probe.interpolant_error
                                << " cond=" << probe.conditional_fraction;
    EXPECT_GE(probe.mc_fraction, 0.0);
  }
}
