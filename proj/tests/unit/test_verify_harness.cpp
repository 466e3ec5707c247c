#include "nllvm/densities.hpp"
#include "nllvm/errors.hpp"
#include "nllvm/gpivi.hpp"
#include "nllvm/transfer_map.hpp"
#include "nllvm/verify_harness.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace nllvm;

TEST(HellingerBound, ClosedFormCases)
{
  EXPECT_DOUBLE_EQ(hellinger_mixture_bound(0.2, 0.2, 0.0), 0.0);
  for (double d : { 0.05, 0.3, 1.0 })
    EXPECT_NEAR(hellinger_mixture_bound(0.1, 0.1, d), 1.0 - std::exp(-d * d / (8.0 * 0.01)), 1e-15);
}

TEST(HellingerBound, EqualityForConstantMaps)
{
  // Two normals: the bound is the exact squared Hellinger distance.
  Grid g(-4.0, 4.0, 4096);
  for (auto [s1, s2, d] : { std::tuple{ 0.1, 0.1, 0.2 }, std::tuple{ 0.1, 0.3, 0.5 }, std::tuple{ 0.4, 0.2, 0.0 } }) {
    auto f1 = mixture_density(TransferFunction::constant(0.0), s1, g);
    auto f2 = mixture_density(TransferFunction::constant(d), s2, g);
    EXPECT_NEAR(divergence(DivergenceKind::hellinger_sq(), f1, f2), hellinger_mixture_bound(s1, s2, d), 1e-7);
  }
}

TEST(HellingerBound, RandomTrialsHaveNoViolations)
{
  auto rep = check_hellinger_bound(100, 1);
  EXPECT_EQ(rep.trials, 100u);
  EXPECT_EQ(rep.violations, 0u);
  EXPECT_LE(rep.worst_margin, 0.0);
  EXPECT_TRUE(rep.pass);
  EXPECT_EQ(rep.table.rows.size(), 100u);

  auto again = check_hellinger_bound(100, 1);
  EXPECT_EQ(again.table.rows, rep.table.rows);
  EXPECT_THROW(check_hellinger_bound(99, 1), ParameterError);
}

TEST(LogSupBound, CalibratedSlackHolds)
{
  Grid g(-1.5, 2.5, 2048);
  auto f0 = cinf_bump(g);
  auto rep = check_logsup_bound(f0, 0.1, { 0.0, 0.05, 0.1, 0.2 }, 20, 4);
  EXPECT_TRUE(rep.pass) << rep.worst_margin;
  EXPECT_EQ(rep.trials, 80u);
  for (const auto& row : rep.table.rows)
    if (row[1] == 0.0)
      EXPECT_DOUBLE_EQ(row[3], 0.0);
  EXPECT_LT(rep.metrics["mean_ratio_1"], rep.metrics["mean_ratio_2"]);
  EXPECT_LT(rep.metrics["mean_ratio_2"], rep.metrics["mean_ratio_3"]);
}

TEST(KS, UniformSample)
{
  std::vector<double> u;
  for (int i = 0; i < 100; ++i)
    u.push_back((i + 0.5) / 100.0);
  EXPECT_NEAR(ks_distance(u, [](double x) { return x; }), 0.005, 1e-12);
  EXPECT_NEAR(chi2_1_cdf(3.841458820694124), 0.95, 1e-9);
}

TEST(Chi2Limit, KlIsHalfChiSquare)
{
  // 2 KL tends to chi^2_1, so KL itself has mean 1/2.
  auto rep = chi2_limit_experiment(10000, 2000, {}, 3);
  EXPECT_EQ(rep.violations, 0u);
  EXPECT_NEAR(rep.metrics["mean"], 0.5, 0.05);
  EXPECT_NEAR(rep.metrics["mean_scaled"], 1.0, 0.1);
  EXPECT_LT(rep.metrics["ks_scaled"], 0.05);
  EXPECT_GT(rep.metrics["ks"], 0.1);
  EXPECT_FALSE(rep.pass);
}

TEST(Chi2Limit, ScaledDistanceShrinksWithN)
{
  Chi2Params p;
  p.theta_star = 3.0;
  auto small = chi2_limit_experiment(100, 2000, p, 5);
  auto large = chi2_limit_experiment(10000, 2000, p, 5);
  EXPECT_LT(large.metrics["ks_scaled"], small.metrics["ks_scaled"]);
  EXPECT_THROW(chi2_limit_experiment(100, 499, p, 5), ParameterError);
  EXPECT_THROW(chi2_limit_experiment(99, 500, p, 5), ParameterError);
}

TEST(L1Support, UnimodalAndBimodal)
{
  Grid g(-0.5, 1.5, 1024);
  auto uni = l1_support_search(truncated_normal(g, 0.5, 0.1, 0.0, 1.0), 0.05);
  EXPECT_TRUE(uni.pass);
  EXPECT_LE(uni.metrics["sigma"], 0.05);
  EXPECT_LT(uni.metrics["best_l1"], 0.05);
  EXPECT_NEAR(uni.metrics["delta"], 0.05 * uni.metrics["sigma"] / 4.0, 1e-15);

  auto trivial = l1_support_search(truncated_normal(g, 0.5, 0.1, 0.0, 1.0), 2.1);
  EXPECT_TRUE(trivial.pass);
  EXPECT_EQ(trivial.trials, 1u);

  auto bi = l1_support_search(gaussian_mixture(g, { { 0.5, 0.25, 0.06 }, { 0.5, 0.75, 0.06 } }), 0.05);
  EXPECT_TRUE(bi.pass) << bi.metrics["best_l1"];
}

TEST(L1Support, ReportsClosestWhenNotFound)
{
  Grid g(-0.5, 1.5, 256);
  auto f0 = GridDensity::from_function(g, [](double x) { return (x >= 0.0 && x <= 1.0) ? 1.0 : 0.0; });
  auto rep = l1_support_search(f0, 1e-4);
  EXPECT_FALSE(rep.pass);
  EXPECT_GT(rep.metrics["best_l1"], 1e-4);
  EXPECT_GT(rep.worst_margin, 0.0);
}

TEST(RiskBound, HighAlphaHasNoFailures)
{
  NormalNormalModel model(1.0, 0.3);
  RiskBoundOptions o;
  o.alphas = { 0.99 };
  o.seed = 11;
  auto rep = risk_bound_experiment(model, o);
  EXPECT_TRUE(rep.pass);
  EXPECT_EQ(rep.metrics["failures_n200_a99"], 0.0);
  EXPECT_LT(rep.metrics["median_lhs_n800_a99"], rep.metrics["median_lhs_n50_a99"]);
  for (std::size_t n : { 50, 200, 800 })
    EXPECT_LE(rep.metrics["witness_reg_n" + std::to_string(n)], rep.metrics["witness_cap_n" + std::to_string(n)]);
}

TEST(RiskBound, HugeEpsIsTrivial)
{
  NormalNormalModel model(1.0, 0.3);
  RiskBoundOptions o;
  o.n_list = { 50 };
  o.alphas = { 0.5 };
  o.reps = 3;
  o.eps_rule = [](std::size_t) { return 3.0; };
  auto rep = risk_bound_experiment(model, o);
  EXPECT_EQ(rep.violations, 0u);
  EXPECT_LT(rep.worst_margin, -1.0);
}

TEST(RiskBound, NeedsExactPosterior)
{
  Logistic1DModel model(0.5);
  EXPECT_THROW(risk_bound_experiment(model, {}), UnsupportedError);
}

TEST(VBBounded, SmallRun)
{
  VBBoundedOptions o;
  o.n_list = { 100, 1000 };
  o.reps = 40;
  auto rep = vb_kl_bounded(o);
  EXPECT_TRUE(rep.pass) << rep.metrics["p95_n100"] << " " << rep.metrics["p95_n1000"];
  EXPECT_LT(rep.metrics["p95_n100"], 0.05);
}

TEST(RiskDecay, SlopeNearMinusOne)
{
  NormalNormalModel model(1.0, 0.3);
  RiskDecayOptions o;
  o.reps = 10;
  auto rep = hellinger_risk_decay(model, o);
  EXPECT_TRUE(rep.pass) << rep.slope;
  EXPECT_NEAR(rep.slope, -1.0, 0.2);
}

TEST(Identities, ClosedFormAndMixture)
{
  auto cf = fbeta_closed_form_check(3, 2);
  EXPECT_TRUE(cf.pass) << cf.worst_margin;
  EXPECT_EQ(cf.trials, 12u);
  auto mix = mixture_identity_check(3, { 0.02, 0.1 }, 2);
  EXPECT_TRUE(mix.pass) << mix.worst_margin;
  EXPECT_EQ(mix.trials, 6u);
}
