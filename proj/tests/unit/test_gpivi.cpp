#include "nllvm/errors.hpp"
#include "nllvm/gpivi.hpp"
#include "nllvm/numeric.hpp"

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

double gauss_kl(double m1, double v1, double m2, double v2)
{
  return 0.5 * (std::log(v2 / v1) + (v1 + (m1 - m2) * (m1 - m2)) / v2 - 1.0);
}

VariationalParams normal_params(double m, double sd)
{
  return { TransferFunction::constant(m), std::log(sd) };
}

struct NotIID : NormalMeanModel
{
  NotIID()
    : NormalMeanModel(1.0, 0.0)
  {
  }
  bool iid() const override { return false; }
};

} // namespace

TEST(QDensity, ConstantMapIsNormal)
{
  Grid g(-3.0, 3.0, 1024);
  auto q = q_density(normal_params(0.4, 0.3), g);
  EXPECT_LT(sup_diff(q, normal_density(g, 0.4, 0.3)), 1e-6);
  EXPECT_NEAR(trapezoid(q.values(), g.step()), 1.0, 1e-6);
}

TEST(QDensity, QuantileMapAddsVariances)
{
  Grid g(-3.0, 3.0, 2048);
  for (double tau : { 0.2, 0.5 }) {
    VariationalParams p{ normal_quantile_map(0.3, tau, 256), std::log(0.1) };
    auto q = q_density(p, g);
    EXPECT_LT(sup_diff(q, normal_density(g, 0.3, std::sqrt(tau * tau + 0.01))), 1e-4) << tau;
  }
}

TEST(KLBall, MembershipMatchesAnalyticGaussian)
{
  NormalMeanModel model(0.5, 0.2);
  KLBallSpec spec{ 0.2, 0.3, 50 };
  EXPECT_TRUE(kl_ball_contains(spec, model, 0.2));
  for (double t = -1.0; t <= 1.0; t += 0.01) {
    double d = t - 0.2;
    double kl = d * d / (2.0 * 0.25);
    double v = kl * kl + d * d / 0.25;
    bool expect = kl <= spec.eps * spec.eps && v <= spec.eps * spec.eps;
    EXPECT_EQ(kl_ball_contains(spec, model, t), expect) << t;
  }
  spec.eps = 1e6;
  for (double t = -1.0; t <= 1.0; t += 0.1)
    EXPECT_TRUE(kl_ball_contains(spec, model, t));
  EXPECT_THROW(kl_ball_contains(spec, NotIID{}, 0.0), UnsupportedError);
}

TEST(Objective, FractionalPosteriorBeatsCompetitors)
{
  NormalNormalModel model(1.0, 0.3);
  Rng rng(1);
  auto data = model.simulate(50, rng);
  const double alpha = 0.7;
  auto m = model.posterior_moments(data, alpha);
  Grid g = posterior_grid(model, data, alpha);
  VBObjective obj(model, data, alpha, g);
  double best = obj(normal_params(m.mean, std::sqrt(m.var)));
  for (int t = 0; t < 20; ++t) {
    double mm = m.mean + rng.normal(0.0, 0.1);
    double sd = std::sqrt(m.var) * std::exp(rng.normal(0.0, 0.3));
    EXPECT_LE(best, obj(normal_params(mm, sd)));
  }
}

TEST(Objective, LinearInAlpha)
{
  NormalNormalModel model(1.0, 0.0);
  Rng rng(2);
  auto data = model.simulate(30, rng);
  Grid g = posterior_grid(model, data, 1.0);
  auto p = normal_params(0.05, 0.2);
  VBObjective a(model, data, 0.3, g), b(model, data, 0.8, g);
  auto q = q_density(p, g);
  EXPECT_NEAR(b(p) - a(p), 0.5 * a.neg_log_lik(q), 1e-9 * std::abs(a.neg_log_lik(q)));
}

TEST(Objective, PriorQuantileHasSmallRegulariser)
{
  NormalNormalModel model(1.0, 0.0, 0.0, 1.0);
  std::vector<double> data{ 0.1 };
  VBObjective obj(model, data, 0.5, model.grid());
  VariationalParams p{ normal_quantile_map(0.0, 1.0, 256), std::log(0.01) };
  EXPECT_LT(obj.prior_kl(q_density(p, model.grid())), 0.05);
}

TEST(Objective, SupportViolation)
{
  NormalMeanModel model(1.0, 0.0, -1.0, 1.0);
  std::vector<double> data{ 0.1, 0.2 };
  EXPECT_THROW(practical_objective(normal_params(0.95, 0.05), model, data, 0.5, model.grid()), SupportError);
  EXPECT_NO_THROW(practical_objective(normal_params(0.0, 0.1), model, data, 0.5, model.grid()));
}

TEST(Psi, ConcentratedAtTruthAndDecomposition)
{
  NormalMeanModel model(1.0, 0.2, -20.0, 20.0);
  Rng rng(3);
  auto data = model.simulate(100, rng);
  Grid g(-0.3, 0.7, 2048);
  auto d = psi_diagnostic(normal_params(0.2, 1e-3), model, data, 0.5, g);
  EXPECT_NEAR(d.model_fit, 0.0, 0.1);
  EXPECT_DOUBLE_EQ(d.psi - d.prior_kl / d.alpha, d.model_fit);
}

TEST(Psi, ModelFitMatchesGaussianMoment)
{
  // E_q[sum log p(y|theta*) - log p(y|theta)] = n E_q[(theta - theta*)^2] / (2 sigma^2)
  // for q centred at theta*.
  const std::size_t n = 200;
  NormalNormalModel model(1.0, 0.0);
  Rng rng(4);
  double s1 = 0.0, s2 = 0.0;
  const int reps = 100;
  for (int r = 0; r < reps; ++r) {
    auto data = model.simulate(n, rng);
    Grid g(-0.6, 0.6, 1024);
    s1 += psi_diagnostic(normal_params(0.0, std::sqrt(1.0 / n)), model, data, 0.5, g).model_fit;
    s2 += psi_diagnostic(normal_params(0.0, std::sqrt(2.0 / n)), model, data, 0.5, g).model_fit;
  }
  EXPECT_NEAR(s1 / reps, 0.5, 0.1);
  EXPECT_NEAR(s2 / reps, 1.0, 0.2);
}

TEST(Optimize, RecoversFractionalPosterior)
{
  NormalNormalModel model(1.0, 0.4);
  Rng rng(5);
  auto data = model.simulate(100, rng);
  const double alpha = 0.99;
  Grid g = posterior_grid(model, data, alpha);
  auto res = optimize(model, data, alpha, 16, g, { 200, 7 });
  EXPECT_LE(res.objective, res.initial_objective);
  auto exact = *model.exact_posterior(data, alpha, g);
  EXPECT_LT(divergence(DivergenceKind::kl(), q_density(res.params, g), exact), 0.05);

  OptimizeOptions again{ 200, 7, res.params };
  auto res2 = optimize(model, data, alpha, 16, g, again);
  EXPECT_LE(res2.sweeps, 3u);
  EXPECT_TRUE(res2.converged);
  EXPECT_LE(res2.objective, res.objective);
}

TEST(Optimize, DeterministicAndNeverWorse)
{
  NormalNormalModel model(1.0, -0.2);
  Rng rng(6);
  auto data = model.simulate(40, rng);
  Grid g = posterior_grid(model, data, 0.5);
  OptimizeOptions o;
  o.iters = 30;
  double ybar = 0.0;
  for (double y : data)
    ybar += y / static_cast<double>(data.size());
  o.init = VariationalParams{ normal_quantile_map(ybar + 0.05, 0.1, 12), std::log(0.05) };
  o.seed = 1;
  auto a = optimize(model, data, 0.5, 12, g, o);
  o.seed = 2;
  auto b = optimize(model, data, 0.5, 12, g, o);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_LE(a.objective, a.initial_objective);
  EXPECT_THROW(optimize(model, data, 0.5, 4, g), ParameterError);
}

TEST(Restricted, WitnessSelfDistanceAndSign)
{
  const std::size_t n = 400;
  NormalNormalModel model(1.0, 0.0);
  Rng rng(7);
  auto data = model.simulate(n, rng);
  const double sn = 1.0 / std::sqrt(2.0 * n);
  RestrictedFamilySpec spec{ 4.0 / std::sqrt(double(n)), sn, 2.0 };
  Grid g(-0.5, 0.5, 1024);
  double mstar = restricted_min_kl(spec, model, data, g);
  EXPECT_GE(mstar, 0.0);
  auto m = model.posterior_moments(data, 1.0);
  EXPECT_LE(mstar, gauss_kl(0.0, 2.0 * sn * sn, m.mean, m.var) + 1e-3);

  // Target that is itself a member: mean -M, tau = sigma_n.
  auto member = normal_density(g, -spec.M, std::sqrt(2.0) * sn);
  RestrictedFamily fam(spec, g);
  EXPECT_LT(fam.min_kl(member), 1e-3);

  Logistic1DModel logit(0.5);
  EXPECT_THROW(restricted_min_kl(spec, logit, data, g), UnsupportedError);
}

TEST(Risk, IntegralMatchesGaussianFormula)
{
  NormalMeanModel model(0.5, 0.1, -5.0, 5.0);
  Grid g(-1.0, 1.2, 4096);
  EXPECT_LT(risk_integral(normal_params(0.1, 1e-4), model, 0.5, Grid(0.09, 0.11, 1024)), 1e-6);
  for (double v : { 0.01, 0.04 }) {
    double r = risk_integral(normal_params(0.1, std::sqrt(v)), model, 0.7, g);
    EXPECT_NEAR(r, 0.7 * v / (2.0 * 0.25), 1e-4);
    EXPECT_GE(r, 0.0);
  }
}

TEST(Risk, BallMassOfFlatPrior)
{
  NormalMeanModel model(1.0, 0.1, -1.0, 1.0, 8192);
  const double eps = 0.2;
  // Both constraints: d^2/2 <= eps^2 and d^2 + d^4/4 <= eps^2.
  double d2 = 2.0 * (std::sqrt(1.0 + eps * eps) - 1.0);
  double delta = std::min(std::sqrt(2.0) * eps, std::sqrt(d2));
  auto ball = ball_mass({ 0.1, eps, 100 }, model);
  EXPECT_NEAR(ball.mass, delta, 1e-6);

  auto wide = risk_bound_rhs(model, 100, 0.5, 1e3);
  EXPECT_NEAR(wide.complexity, 0.0, 1e-9);
  auto r = risk_bound_rhs(model, 100, 0.5, eps);
  EXPECT_NEAR(r.log_inv_mass, -std::log(delta), 1e-5);
  EXPECT_EQ(r.a1_holds, r.log_inv_mass <= 100 * eps * eps);
  EXPECT_FALSE(r.a1_printed_holds);
  EXPECT_NEAR(r.bound, 2.0 * 0.5 / 0.5 * eps * eps + r.log_inv_mass / 50.0, 1e-12);
  EXPECT_THROW(ball_mass({ 0.1, 1e-6, 100 }, model), ResolutionError);
}

TEST(Logistic, DivergenceIdentities)
{
  Logistic1DModel model(0.8);
  EXPECT_NEAR(model.kl1(0.8, 0.8), 0.0, 1e-12);
  for (double b : { -1.0, 0.0, 0.5, 2.0 }) {
    double h2 = model.hellinger1(0.8, b);
    // D_1/2 = -2 log(1 - h^2).
    EXPECT_NEAR(model.renyi1(0.8, b, 0.5), -2.0 * std::log(1.0 - h2), 1e-10);
    EXPECT_GE(model.v1(0.8, b), model.kl1(0.8, b) * model.kl1(0.8, b));
    EXPECT_LE(model.renyi1(0.8, b, 0.5), model.kl1(0.8, b) + 1e-12);
  }
  // Monte Carlo check of the per-datum KL.
  Rng rng(8);
  auto d = model.simulate(200000, rng);
  double s = 0.0;
  for (double v : d)
    s += model.log_likelihood(0.8, v) - model.log_likelihood(-0.3, v);
  EXPECT_NEAR(s / static_cast<double>(d.size()), model.kl1(0.8, -0.3), 5e-3);
}
