#include "nllvm/gp_prior.hpp"

#include "nllvm/errors.hpp"
#include "nllvm/numeric.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace nllvm {

void GPPriorConfig::validate() const
{
  if (!(variance > 0.0))
    throw ParameterError("GP variance must be positive");
  if (rescale.kind == RescaleDist::Kind::Fixed && !(rescale.value > 0.0))
    throw ParameterError("fixed rescale must be positive");
  if (rescale.kind == RescaleDist::Kind::Gamma && !(rescale.shape > 0.0 && rescale.rate > 0.0))
    throw ParameterError("gamma rescale needs positive shape and rate");
  if (!(a_sigma > 0.0 && b_sigma > 0.0))
    throw ParameterError("inverse-gamma sigma prior needs positive a and b");
  if (!(jitter > 0.0) || jitter > 1e-6 * variance)
    throw ParameterError("jitter must lie in (0, 1e-6 * variance]");
}

Eigen::MatrixXd se_kernel(const std::vector<double>& xs,
                          const std::vector<double>& ys,
                          double variance,
                          double rescale)
{
  const double a2 = rescale * rescale;
  Eigen::MatrixXd k(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(ys.size()));
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < ys.size(); ++j) {
      double d = xs[i] - ys[j];
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = variance * std::exp(-a2 * d * d);
    }
  return k;
}

Eigen::MatrixXd se_kernel(const std::vector<double>& xs, double variance, double rescale)
{
  return se_kernel(xs, xs, variance, rescale);
}

Eigen::MatrixXd jittered_cholesky(const Eigen::MatrixXd& m, double jitter)
{
  const auto n = m.rows();
  double j = jitter;
  for (int attempt = 0; attempt <= kJitterDoublings; ++attempt) {
    Eigen::MatrixXd boosted = m;
    boosted.diagonal().array() += j;
    Eigen::LLT<Eigen::MatrixXd> llt(boosted);
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd l = llt.matrixL();
      if (l.allFinite())
        return l;
    }
    j *= 2.0;
  }
  std::ostringstream os;
  os << "Cholesky failed for a " << n << "x" << n << " matrix after " << kJitterDoublings
     << " jitter doublings (final jitter " << j / 2.0 << ")";
  throw ConditioningError(os.str());
}

std::vector<double> uniform_knots(std::size_t n)
{
  std::vector<double> k(n);
  for (std::size_t i = 0; i < n; ++i)
    k[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  k.back() = 1.0;
  return k;
}

GPPathSampler::GPPathSampler(const GPPriorConfig& cfg, double rescale, std::size_t n_knots)
  : knots_(uniform_knots(n_knots))
  , rescale_(rescale)
{
  cfg.validate();
  if (n_knots < kMinPathKnots || n_knots > kMaxPathKnots)
    throw ParameterError("GP path needs between 16 and 1024 knots");
  if (!(rescale > 0.0))
    throw ParameterError("rescale must be positive");
  chol_ = jittered_cholesky(se_kernel(knots_, cfg.variance, rescale), cfg.jitter);
}

GPDraw GPPathSampler::draw(Rng& rng) const
{
  Eigen::VectorXd z(chol_.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    z[i] = rng.normal();
  Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>() * z;
  GPDraw d;
  d.knots = knots_;
  d.values.assign(v.data(), v.data() + v.size());
  d.rescale_used = rescale_;
  d.seed = rng.seed();
  return d;
}

double sample_rescale(const GPPriorConfig& cfg, Rng& rng)
{
  cfg.validate();
  if (cfg.rescale.kind == RescaleDist::Kind::Fixed)
    return cfg.rescale.value;
  double a = 0.0;
  while (!(a > 0.0))
    a = rng.gamma(cfg.rescale.shape, cfg.rescale.rate);
  return a;
}

GPDraw sample_path(const GPPriorConfig& cfg, double rescale, std::size_t n_knots, Rng& rng)
{
  return GPPathSampler(cfg, rescale, n_knots).draw(rng);
}

double sample_sigma(const GPPriorConfig& cfg, Rng& rng)
{
  cfg.validate();
  double g = 0.0;
  while (!(g > 0.0))
    g = rng.gamma(cfg.a_sigma, cfg.b_sigma);
  return 1.0 / g;
}

double inverse_gamma_logpdf(double s, double a, double b)
{
  if (!(s > 0.0))
    return -std::numeric_limits<double>::infinity();
  return a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(s) - b / s;
}

GridDensity prior_draw_density(const GPPriorConfig& cfg, const Grid& grid, Rng& rng, std::size_t n_knots)
{
  double a = sample_rescale(cfg, rng);
  auto path = sample_path(cfg, a, n_knots, rng);
  double sigma = sample_sigma(cfg, rng);
  return mixture_density(path.transfer(), sigma, grid);
}

SupportProbe support_probe(const GPPriorConfig& cfg,
                           const TransferFunction& target,
                           double delta,
                           std::size_t draws,
                           Rng& rng,
                           std::size_t n_knots,
                           std::size_t n_condition)
{
  if (!(delta > 0.0))
    throw ParameterError("support probe radius must be positive");
  if (n_condition < 2 || n_condition > n_knots)
    throw ParameterError("conditioning knots must lie in [2, n_knots]");

  SupportProbe out;
  out.delta = delta;
  out.rescale = 1.0 / delta;
  out.draws = draws;

  GPPathSampler sampler(cfg, out.rescale, n_knots);
  const auto& xs = sampler.knots();
  std::vector<double> tv(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    tv[i] = target(xs[i]);
  auto target_on_knots = TransferFunction(xs, tv);
  // Sup over [0,1] combines the knot-grid distance with the target's own
  // deviation from its restriction to the knots.
  const double restriction_error = sup_distance(target, target_on_knots);

  std::size_t hits = 0;
  for (std::size_t d = 0; d < draws; ++d) {
    auto path = sampler.draw(rng);
    double s = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
      s = std::max(s, std::abs(path.values[i] - tv[i]));
    if (s + restriction_error < delta)
      ++hits;
  }
  out.mc_fraction = draws ? static_cast<double>(hits) / static_cast<double>(draws) : 0.0;

  // Exact conditioning on the target at a coarse set of knots.
  auto cx = uniform_knots(n_condition);
  Eigen::VectorXd cy(static_cast<Eigen::Index>(n_condition));
  for (std::size_t i = 0; i < n_condition; ++i)
    cy[static_cast<Eigen::Index>(i)] = target(cx[i]);
  Eigen::MatrixXd kcc = se_kernel(cx, cfg.variance, out.rescale);
  Eigen::MatrixXd lcc = jittered_cholesky(kcc, cfg.jitter);
  Eigen::MatrixXd kxc = se_kernel(xs, cx, cfg.variance, out.rescale);
  auto lview = lcc.triangularView<Eigen::Lower>();
  Eigen::VectorXd alpha = lview.transpose().solve(lview.solve(cy));
  Eigen::VectorXd mean = kxc * alpha;

  Eigen::VectorXd white = lview.solve(cy);
  out.log_density_at_knots = -0.5 * white.squaredNorm() - lcc.diagonal().array().log().sum() -
                             static_cast<double>(n_condition) * kLogSqrt2Pi;

  std::vector<double> mv(mean.data(), mean.data() + mean.size());
  out.interpolant_error = sup_distance(target, TransferFunction(xs, mv));

  Eigen::MatrixXd v = lview.solve(kxc.transpose());
  Eigen::MatrixXd cond = se_kernel(xs, cfg.variance, out.rescale) - v.transpose() * v;
  cond = 0.5 * (cond + cond.transpose());
  Eigen::MatrixXd lcond = jittered_cholesky(cond, cfg.jitter * 10.0);
  std::size_t cond_hits = 0;
  const std::size_t cond_draws = std::max<std::size_t>(draws / 10, 100);
  Eigen::VectorXd z(mean.size());
  for (std::size_t d = 0; d < cond_draws; ++d) {
    for (Eigen::Index i = 0; i < z.size(); ++i)
      z[i] = rng.normal();
    Eigen::VectorXd path = mean + lcond.triangularView<Eigen::Lower>() * z;
    double s = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
      s = std::max(s, std::abs(path[static_cast<Eigen::Index>(i)] - tv[i]));
    if (s + restriction_error < delta)
      ++cond_hits;
  }
  out.conditional_fraction = static_cast<double>(cond_hits) / static_cast<double>(cond_draws);
  out.positive = out.interpolant_error < delta && std::isfinite(out.log_density_at_knots) &&
                 out.conditional_fraction > 0.0;
  return out;
}

} // namespace nllvm
