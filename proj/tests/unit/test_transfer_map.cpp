#include "nllvm/densities.hpp"
#include "nllvm/errors.hpp"
#include "nllvm/log.hpp"
#include "nllvm/numeric.hpp"
#include "nllvm/transfer_map.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace nllvm;

namespace {

double sup_diff(const GridDensity& a, const GridDensity& b)
{
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Direct midpoint quadrature over x; slow but independent of the
// closed-form segment integration.
GridDensity brute_force_mixture(const TransferFunction& mu, double sigma, const Grid& g, std::size_t m)
{
  std::vector<double> v(g.n, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    double mx = mu((static_cast<double>(k) + 0.5) / static_cast<double>(m));
    for (std::size_t i = 0; i < g.n; ++i) {
      double z = (g.x(i) - mx) / sigma;
      v[i] += std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * M_PI));
    }
  }
  return GridDensity(g, std::move(v));
}

TransferFunction step_map(double jump_at, double low, double high)
{
  return TransferFunction({ 0.0, jump_at, jump_at + 1e-9, 1.0 }, { low, low, high, high });
}

} // namespace

TEST(TransferFunction, Validation)
{
  EXPECT_THROW(TransferFunction({ 0.0, 0.5 }, { 1.0, 2.0 }), ParameterError);
  EXPECT_THROW(TransferFunction({ 0.0, 0.6, 0.5, 1.0 }, { 0, 0, 0, 0 }), ParameterError);
  EXPECT_THROW(TransferFunction({ 0.0, 1.0 }, { 0.0 }), ShapeError);
  EXPECT_THROW(TransferFunction({ 0.0, 1.0 }, { 0.0, INFINITY }), NumericError);
  auto mu = TransferFunction({ 0.0, 0.25, 1.0 }, { 0.0, 1.0, -2.0 });
  EXPECT_DOUBLE_EQ(mu(0.125), 0.5);
  EXPECT_DOUBLE_EQ(mu(0.625), -0.5);
  EXPECT_FALSE(mu.uniform_knots());
}

TEST(TransferFunction, SupDistanceOnKnotUnion)
{
  auto a = TransferFunction({ 0.0, 0.5, 1.0 }, { 0.0, 1.0, 0.0 });
  auto b = TransferFunction({ 0.0, 0.25, 1.0 }, { 0.0, 0.0, 0.0 });
  EXPECT_DOUBLE_EQ(sup_distance(a, b), 1.0);
}

TEST(Quantile, UniformIsIdentity)
{
  Grid g(0.0, 1.0, 1001);
  auto f = GridDensity(g, std::vector<double>(g.n, 1.0));
  auto mu = quantile_of(f, 257);
  for (std::size_t k = 0; k < mu.size(); ++k)
    EXPECT_NEAR(mu.values()[k], mu.knots()[k], 1e-6);
}

TEST(Quantile, SymmetricNormalMedian)
{
  Grid g(0.0, 1.0, 2001);
  auto f = truncated_normal(g, 0.5, 0.1, 0.0, 1.0);
  auto mu = quantile_of(f, 129);
  EXPECT_NEAR(mu(0.5), 0.5, 1e-4);
  for (std::size_t k = 1; k < mu.size(); ++k)
    EXPECT_GE(mu.values()[k], mu.values()[k - 1]);
}

TEST(Quantile, SymmetricMixtureMedian)
{
  Grid g(0.0, 1.0, 2001);
  auto f = gaussian_mixture(g, { { 0.5, 0.3, 0.05 }, { 0.5, 0.7, 0.05 } });
  // Cross-check the CDF at 0.5 directly.
  auto c = f.cdf();
  EXPECT_NEAR(c[1000], 0.5, 1e-9);
  auto mu = quantile_of(f, 129);
  EXPECT_NEAR(mu(0.5), 0.5, 1e-3);
}

TEST(Quantile, EndpointsAndClip)
{
  Grid g(-1.0, 2.0, 3001);
  auto f = GridDensity::from_function(g, [](double x) { return (x >= 0.0 && x <= 1.0) ? 1.0 : 0.0; });
  auto mu = quantile_of(f, 64);
  EXPECT_NEAR(mu.values().front(), 0.0, 2e-3);
  EXPECT_NEAR(mu.values().back(), 1.0, 2e-3);
  auto clipped = quantile_of(f, 64, 0.01);
  EXPECT_NEAR(clipped.values().front(), 0.01, 2e-3);
  EXPECT_THROW(quantile_of(f, 8), ParameterError);
}

TEST(Quantile, FlatRegionWarns)
{
  Grid g(0.0, 1.0, 1001);
  auto f = GridDensity::from_function(g, [](double x) { return (x < 0.3 || x > 0.7) ? 1.0 : 0.0; });
  set_warnings_quiet(true);
  auto before = warning_count();
  auto mu = quantile_of(f, 65);
  EXPECT_GT(warning_count(), before);
  set_warnings_quiet(false);
  EXPECT_GE(mu(0.5), 0.3 - 2e-3);
  EXPECT_LE(mu(0.5), 0.7 + 2e-3);
  EXPECT_NEAR(mu(0.25), 0.15, 2e-3);
  EXPECT_NEAR(mu(0.75), 0.85, 2e-3);
}

TEST(Mixture, ConstantMapGivesNormal)
{
  Grid g(-2.0, 3.0, 1024);
  for (double sigma : { 0.05, 0.3 }) {
    auto f = mixture_density(TransferFunction::constant(0.4), sigma, g);
    EXPECT_LT(sup_diff(f, normal_density(g, 0.4, sigma)), 1e-5);
  }
}

TEST(Mixture, QuantileMapReproducesConvolution)
{
  Grid g(-1.5, 2.5, 2048);
  auto f0 = cinf_bump(g);
  for (double sigma : { 0.02, 0.1 }) {
    auto mix = mixture_density(quantile_of(f0, 1024), sigma, g);
    EXPECT_LT(sup_diff(mix, convolve_gaussian(f0, sigma)), 2e-3);
  }
}

TEST(Mixture, StepMapGivesTwoComponents)
{
  Grid g(-1.0, 2.0, 1024);
  auto f = mixture_density(step_map(0.5, 0.0, 1.0), 0.1, g);
  auto expect = gaussian_mixture(g, { { 0.5, 0.0, 0.1 }, { 0.5, 1.0, 0.1 } });
  EXPECT_LT(sup_diff(f, expect), 1e-5);
}

TEST(Mixture, MatchesBruteForceQuadrature)
{
  Grid g(-2.0, 3.0, 512);
  auto mu = TransferFunction::from_function(33, [](double x) { return std::sin(6.0 * x) + x; });
  auto fast = mixture_density(mu, 0.15, g);
  auto slow = brute_force_mixture(mu, 0.15, g, 1 << 15);
  EXPECT_LT(sup_diff(fast, slow), 1e-5);
}

TEST(Mixture, CoverageErrorReportsLoss)
{
  Grid g(0.0, 1.0, 256);
  try {
    mixture_density(TransferFunction::constant(0.95), 0.1, g);
    FAIL();
  } catch (const CoverageError& e) {
    EXPECT_NEAR(e.lost_mass(), 1.0 - std_normal_cdf(0.5) + std_normal_cdf(-9.5), 1e-9);
  }
}

TEST(Mixture, HellingerAndL1Continuity)
{
  Grid g(-5.0, 6.0, 2048);
  Rng rng(17);
  for (int t = 0; t < 100; ++t) {
    double sigma = rng.uniform(0.1, 0.5);
    auto m1 = TransferFunction::from_function(17, [&](double) { return rng.uniform(0.0, 1.0); });
    auto m2 = TransferFunction::from_function(17, [&](double) { return rng.uniform(0.0, 1.0); });
    auto f1 = mixture_density(m1, sigma, g);
    auto f2 = mixture_density(m2, sigma, g);
    double d = sup_distance(m1, m2);
    EXPECT_LE(divergence(DivergenceKind::hellinger_sq(), f1, f2),
              1.0 - std::exp(-d * d / (8.0 * sigma * sigma)) + 1e-6);
    EXPECT_LE(divergence(DivergenceKind::l1(), f1, f2), std::sqrt(2.0 / M_PI) * d / sigma + 1e-6);
  }
}

TEST(Histogram, IdentityMapSplitsEvenly)
{
  auto mu = TransferFunction::on_uniform_knots({ 0.0, 1.0 });
  auto h = induced_histogram(mu, std::vector<double>{ 0.0, 0.5, 1.0 });
  EXPECT_NEAR(h.masses[0], 0.5, 1e-12);
  EXPECT_NEAR(h.masses[1], 0.5, 1e-12);
}

TEST(Histogram, LevelSetMass)
{
  auto h = induced_histogram(step_map(0.3, 0.0, 1.0), 4);
  EXPECT_NEAR(h.masses.front(), 0.3, 1.0 / 65536.0);
  EXPECT_NEAR(h.masses.back(), 0.7, 1.0 / 65536.0);
  double total = 0.0;
  for (double m : h.masses)
    total += m;
  EXPECT_NEAR(total, 1.0, 1e-8);
}

TEST(Histogram, IncreasingMapHasNoAtoms)
{
  // mu(x) = x^2 pushes U(0,1) to density 1 / (2 sqrt t); every bin mass is
  // bounded by its exact integral.
  auto mu = TransferFunction::from_function(1025, [](double x) { return x * x; });
  auto h = induced_histogram(mu, 20);
  for (std::size_t b = 0; b < h.masses.size(); ++b) {
    double exact = std::sqrt(h.bin_edges[b + 1]) - std::sqrt(h.bin_edges[b]);
    EXPECT_NEAR(h.masses[b], exact, 2e-3);
  }
  EXPECT_THROW(induced_histogram(mu, 1), ParameterError);
}
