#include "nllvm/verify_harness.hpp"

#include "nllvm/densities.hpp"
#include "nllvm/errors.hpp"
#include "nllvm/gp_prior.hpp"
#include "nllvm/hi_order_kernel.hpp"
#include "nllvm/numeric.hpp"
#include "nllvm/parallel.hpp"
#include "nllvm/transfer_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace nllvm {

namespace {

double sup_abs_diff(std::span<const double> a, std::span<const double> b)
{
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double quantile(std::vector<double> v, double p)
{
  std::sort(v.begin(), v.end());
  double pos = p * static_cast<double>(v.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double mean_of(const std::vector<double>& v)
{
  double s = 0.0;
  for (double x : v)
    s += x;
  return s / static_cast<double>(v.size());
}

std::string suffix(std::size_t n)
{
  return "_n" + std::to_string(n);
}

std::string alpha_tag(double a)
{
  auto s = std::to_string(static_cast<int>(std::lround(a * 100.0)));
  return "_a" + s;
}

// Truncated f_beta witness: the j = 1 correction of the prior on a window
// around the ball, cut to the ball and smoothed with sigma = half-width / 10.
// Returns D(q || prior) using the analytic log prior.
double witness_regulariser(const BayesModel& model, const BallMass& ball)
{
  const double half = 0.5 * (ball.hi - ball.lo);
  const double sigma = half / 10.0;
  Grid g(ball.lo - 4.0 * half, ball.hi + 4.0 * half, 2049);
  auto prior = model.prior_density(g);

  // Raw convolutions: edge losses stay far from the ball.
  auto coef = fbeta_coefficients(1);
  std::vector<double> fb(g.n, 0.0);
  for (std::size_t i = 0; i < coef.size(); ++i) {
    std::vector<double> term(prior.values().begin(), prior.values().end());
    if (i > 0)
      term = convolve_values(g, term, sigma * std::sqrt(static_cast<double>(i))).values;
    for (std::size_t k = 0; k < g.n; ++k)
      fb[k] += coef[i] * term[k];
  }
  for (std::size_t k = 0; k < g.n; ++k) {
    double x = g.x(k);
    if (x < ball.lo || x > ball.hi || fb[k] < 0.0)
      fb[k] = 0.0;
  }
  auto q = convolve_gaussian(GridDensity(g, std::move(fb)), sigma);

  std::vector<double> integrand(g.n, 0.0);
  for (std::size_t k = 0; k < g.n; ++k)
    if (q[k] > 0.0)
      integrand[k] = q[k] * (std::log(q[k]) - model.log_prior(g.x(k)));
  double kl = trapezoid(integrand, g.step());
  if (!std::isfinite(kl))
    throw NumericError("witness regulariser is not finite");
  return kl;
}

} // namespace

double hellinger_mixture_bound(double s1, double s2, double sup_dist)
{
  double ss = s1 * s1 + s2 * s2;
  return 1.0 - std::sqrt(2.0 * s1 * s2 / ss) * std::exp(-sup_dist * sup_dist / (4.0 * ss));
}

CheckReport check_hellinger_bound(const HellingerBoundOptions& opts)
{
  if (opts.trials < 100)
    throw ParameterError("hellinger bound check needs at least 100 trials");
  if (!(opts.sigma_lo > 0.0 && opts.sigma_hi >= opts.sigma_lo))
    throw ParameterError("bad sigma range");

  GPPriorConfig cfg;
  cfg.rescale = RescaleDist::fixed(opts.rescale);
  GPPathSampler sampler(cfg, opts.rescale, opts.n_knots);

  struct Row
  {
    double s1, s2, dist, lhs, rhs;
  };
  std::vector<Row> rows(opts.trials);
  parallel_for(opts.trials, [&](std::size_t t) {
    Rng rng = Rng::for_task(opts.seed, "hellinger-bound", t);
    auto m1 = sampler.draw(rng).transfer();
    auto m2 = sampler.draw(rng).transfer();
    double s1 = rng.uniform(opts.sigma_lo, opts.sigma_hi);
    double s2 = rng.uniform(opts.sigma_lo, opts.sigma_hi);
    auto f1 = mixture_density(m1, s1, opts.grid);
    auto f2 = mixture_density(m2, s2, opts.grid);
    double d = sup_distance(m1, m2);
    rows[t] = { s1, s2, d, divergence(DivergenceKind::hellinger_sq(), f1, f2), hellinger_mixture_bound(s1, s2, d) };
  });

  CheckReport rep;
  rep.name = "hellinger-bound";
  rep.seed = opts.seed;
  rep.params = { { "trials", static_cast<double>(opts.trials) },
                 { "rescale", opts.rescale },
                 { "sigma_lo", opts.sigma_lo },
                 { "sigma_hi", opts.sigma_hi },
                 { "slack", kHellingerSlack },
                 { "grid_n", static_cast<double>(opts.grid.n) } };
  rep.table.columns = { "trial", "sigma1", "sigma2", "sup_dist", "hellinger_sq", "bound", "margin" };
  double tightest = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < rows.size(); ++t) {
    const auto& r = rows[t];
    double margin = r.lhs - r.rhs - kHellingerSlack;
    rep.record(margin);
    tightest = std::min(tightest, r.rhs - r.lhs);
    rep.table.rows.push_back({ static_cast<double>(t), r.s1, r.s2, r.dist, r.lhs, r.rhs, margin });
  }
  rep.metrics["min_gap"] = tightest;
  rep.pass = rep.violations == 0;
  return rep;
}

CheckReport check_hellinger_bound(std::size_t trials, std::uint64_t seed)
{
  HellingerBoundOptions o;
  o.trials = trials;
  o.seed = seed;
  return check_hellinger_bound(o);
}

CheckReport check_logsup_bound(const GridDensity& f0,
                               double sigma,
                               const std::vector<double>& deltas,
                               std::size_t trials,
                               std::uint64_t seed)
{
  if (!(sigma > 0.0))
    throw ParameterError("sigma must be positive");
  if (deltas.empty() || trials < 1)
    throw ParameterError("need at least one delta and one trial");
  for (double d : deltas)
    if (!(d >= 0.0))
      throw ParameterError("deltas must be non-negative");

  const Grid& g = f0.grid();
  auto mu0 = quantile_of(f0, 256);
  const double c_hat = divergence(DivergenceKind::sup_log_ratio(), f0, mixture_density(mu0, sigma, g));

  constexpr double kPathRescale = 5.0;
  GPPriorConfig cfg;
  cfg.rescale = RescaleDist::fixed(kPathRescale);
  GPPathSampler sampler(cfg, kPathRescale, 64);

  const std::size_t nd = deltas.size();
  std::vector<double> ratio(trials * nd);
  parallel_for(trials, [&](std::size_t t) {
    Rng rng = Rng::for_task(seed, "logsup-bound", t);
    auto path = sampler.draw(rng).transfer();
    std::vector<double> gv(mu0.size());
    double gmax = 0.0;
    for (std::size_t k = 0; k < mu0.size(); ++k) {
      gv[k] = path(mu0.knots()[k]);
      gmax = std::max(gmax, std::abs(gv[k]));
    }
    for (std::size_t d = 0; d < nd; ++d) {
      std::vector<double> vals(mu0.size());
      for (std::size_t k = 0; k < mu0.size(); ++k)
        vals[k] = mu0.values()[k] + deltas[d] * gv[k] / gmax;
      TransferFunction mu(mu0.knots(), vals);
      ratio[t * nd + d] = divergence(DivergenceKind::sup_log_ratio(), f0, mixture_density(mu, sigma, g));
    }
  });

  CheckReport rep;
  rep.name = "logsup-bound";
  rep.seed = seed;
  rep.params = { { "sigma", sigma }, { "trials", static_cast<double>(trials) }, { "slack", kLogSupSlack } };
  rep.metrics["c_hat"] = c_hat;
  rep.table.columns = { "trial", "delta", "sup_log_ratio", "excess", "margin" };
  std::vector<double> sums(nd, 0.0);
  for (std::size_t t = 0; t < trials; ++t)
    for (std::size_t d = 0; d < nd; ++d) {
      double r = ratio[t * nd + d];
      double excess = r - deltas[d] * deltas[d] / (sigma * sigma) - c_hat;
      rep.record(excess - kLogSupSlack);
      sums[d] += r;
      rep.table.rows.push_back({ static_cast<double>(t), deltas[d], r, excess, excess - kLogSupSlack });
    }
  for (std::size_t d = 0; d < nd; ++d) {
    rep.params["delta_" + std::to_string(d)] = deltas[d];
    rep.metrics["mean_ratio_" + std::to_string(d)] = sums[d] / static_cast<double>(trials);
  }
  rep.pass = rep.violations == 0;
  return rep;
}

double chi2_1_cdf(double x)
{
  return x <= 0.0 ? 0.0 : std::erf(std::sqrt(0.5 * x));
}

double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf)
{
  if (sample.empty())
    throw ParameterError("KS distance needs a non-empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    double f = cdf(sample[i]);
    d = std::max({ d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n });
  }
  return d;
}

CheckReport chi2_limit_experiment(std::size_t n, std::size_t reps, const Chi2Params& p, std::uint64_t seed)
{
  if (reps < 500)
    throw ParameterError("chi-square limit needs at least 500 replicates");
  if (n < 100)
    throw ParameterError("chi-square limit needs n >= 100");
  if (!(p.sigma > 0.0 && p.s0 > 0.0))
    throw ParameterError("model scales must be positive");

  const double nn = static_cast<double>(n);
  const double s2 = p.sigma * p.sigma / nn;
  const double post_var = 1.0 / (nn / (p.sigma * p.sigma) + 1.0 / (p.s0 * p.s0));

  std::vector<double> kl(reps);
  parallel_for(reps, [&](std::size_t r) {
    Rng rng = Rng::for_task(seed, "chi2-limit", r);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      sum += rng.normal(p.theta_star, p.sigma);
    double post_mean = post_var * (sum / (p.sigma * p.sigma) + p.mu0 / (p.s0 * p.s0));
    double d = p.theta_star - post_mean;
    kl[r] = 0.5 * std::log(post_var / s2) + (s2 + d * d) / (2.0 * post_var) - 0.5;
  });

  CheckReport rep;
  rep.name = "chi2-limit";
  rep.seed = seed;
  rep.params = { { "n", nn },
                 { "reps", static_cast<double>(reps) },
                 { "sigma", p.sigma },
                 { "theta_star", p.theta_star },
                 { "mu0", p.mu0 },
                 { "s0", p.s0 } };
  rep.table.columns = { "rep", "kl" };
  std::vector<double> scaled(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    // Rounding can leave a zero KL slightly negative.
    rep.record(-kl[r] - 1e-12);
    scaled[r] = 2.0 * kl[r];
    rep.table.rows.push_back({ static_cast<double>(r), kl[r] });
  }
  double ks = ks_distance(kl, chi2_1_cdf);
  double mean = mean_of(kl);
  rep.metrics["ks"] = ks;
  rep.metrics["mean"] = mean;
  rep.metrics["ks_scaled"] = ks_distance(scaled, chi2_1_cdf);
  rep.metrics["mean_scaled"] = mean_of(scaled);
  rep.pass = rep.violations == 0 && ks <= kChi2MaxKS && mean >= kChi2MeanLo && mean <= kChi2MeanHi;
  return rep;
}

CheckReport l1_support_search(const GridDensity& f0, double eps)
{
  if (!(eps > 0.0))
    throw ParameterError("eps must be positive");
  const Grid& g = f0.grid();
  const double h = g.step();
  auto mu = quantile_of(f0, 512, kSupportClip);

  CheckReport rep;
  rep.name = "l1-support";
  rep.params = { { "eps", eps }, { "clip", kSupportClip } };
  rep.table.columns = { "sigma", "l1" };
  double best = std::numeric_limits<double>::infinity();
  double best_sigma = 0.0;
  bool found = false;
  for (double sigma = (g.hi - g.lo) / 10.0; sigma >= 2.0 * h; sigma *= 0.8) {
    auto pad = static_cast<std::size_t>(std::ceil(9.0 * sigma / h)) + 1;
    auto fp = f0.padded(pad, pad);
    double l1 = divergence(DivergenceKind::l1(), fp, mixture_density(mu, sigma, fp.grid()));
    rep.table.rows.push_back({ sigma, l1 });
    ++rep.trials;
    if (l1 < best) {
      best = l1;
      best_sigma = sigma;
    }
    if (l1 < eps) {
      found = true;
      break;
    }
  }
  rep.metrics["best_l1"] = best;
  rep.metrics["sigma"] = best_sigma;
  rep.metrics["delta"] = eps * best_sigma / 4.0;
  rep.worst_margin = best - eps;
  rep.violations = found ? 0 : 1;
  rep.pass = found;
  return rep;
}

CheckReport risk_bound_experiment(const BayesModel& model, const RiskBoundOptions& opts)
{
  if (opts.n_list.empty() || opts.alphas.empty() || opts.reps < 1)
    throw ParameterError("risk bound experiment needs sizes, alphas and replicates");
  for (double a : opts.alphas)
    if (!(a > 0.0 && a < 1.0))
      throw ParameterError("alpha must lie in (0, 1)");
  if (!model.exact_posterior({ model.theta_star() }, opts.alphas.front(), model.grid()))
    throw UnsupportedError("risk bound experiment needs an exact fractional posterior");
  auto eps_of = [&](std::size_t n) {
    return opts.eps_rule ? opts.eps_rule(n) : 2.0 / std::sqrt(static_cast<double>(n));
  };

  const std::size_t na = opts.alphas.size();
  const std::size_t cells = opts.n_list.size() * na;
  std::vector<RiskBound> rhs(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    std::size_t n = opts.n_list[c / na];
    rhs[c] = risk_bound_rhs(model, n, opts.alphas[c % na], eps_of(n), opts.D);
  }

  const std::size_t tasks = cells * opts.reps;
  std::vector<double> lhs(tasks);
  parallel_for(tasks, [&](std::size_t idx) {
    std::size_t c = idx / opts.reps;
    std::size_t n = opts.n_list[c / na];
    double alpha = opts.alphas[c % na];
    Rng rng = Rng::for_task(opts.seed, "risk-bound", idx);
    auto data = model.simulate(n, rng);
    auto grid = posterior_grid(model, data, alpha);
    OptimizeOptions o;
    o.seed = rng.stream(1).seed();
    auto fit = optimize(model, data, alpha, opts.knots, grid, o);
    lhs[idx] = risk_integral(fit.params, model, alpha, grid);
  });

  CheckReport rep;
  rep.name = "risk-bound";
  rep.seed = opts.seed;
  rep.params = { { "reps", static_cast<double>(opts.reps) },
                 { "D", opts.D },
                 { "knots", static_cast<double>(opts.knots) },
                 { "max_failures", static_cast<double>(opts.max_failures) },
                 { "witness_factor", opts.witness_factor } };
  rep.table.columns = { "n", "alpha", "rep", "lhs", "rhs", "margin" };
  bool ok = true;
  for (std::size_t c = 0; c < cells; ++c) {
    std::size_t n = opts.n_list[c / na];
    double alpha = opts.alphas[c % na];
    double allowed = rhs[c].bound + rhs[c].remainder;
    std::size_t fails = 0;
    std::vector<double> cell(opts.reps);
    for (std::size_t r = 0; r < opts.reps; ++r) {
      double v = lhs[c * opts.reps + r];
      double margin = v - allowed;
      rep.record(margin);
      fails += margin > 0.0;
      cell[r] = v;
      rep.table.rows.push_back({ static_cast<double>(n), alpha, static_cast<double>(r), v, allowed, margin });
    }
    ok = ok && fails <= opts.max_failures;
    auto tag = suffix(n) + alpha_tag(alpha);
    rep.metrics["failures" + tag] = static_cast<double>(fails);
    rep.metrics["median_lhs" + tag] = quantile(cell, 0.5);
    rep.metrics["rhs" + tag] = allowed;
    rep.metrics["a1_holds" + tag] = rhs[c].a1_holds ? 1.0 : 0.0;
  }

  for (std::size_t n : opts.n_list) {
    auto ball = ball_mass({ model.theta_star(), eps_of(n), n }, model);
    double reg = witness_regulariser(model, ball);
    double cap = opts.witness_factor * -std::log(std::min(ball.mass, 1.0));
    rep.metrics["witness_reg" + suffix(n)] = reg;
    rep.metrics["witness_cap" + suffix(n)] = cap;
    ok = ok && reg <= cap;
  }
  rep.pass = ok;
  return rep;
}

CheckReport vb_kl_bounded(const VBBoundedOptions& opts)
{
  if (opts.n_list.empty() || opts.reps < 20)
    throw ParameterError("boundedness check needs sizes and at least 20 replicates");
  NormalNormalModel model(1.0, 0.0, 0.0, 1.0, 64);

  CheckReport rep;
  rep.name = "vb-kl-bounded";
  rep.seed = opts.seed;
  rep.params = { { "reps", static_cast<double>(opts.reps) }, { "c0", opts.c0 }, { "factor", opts.factor } };
  rep.table.columns = { "n", "rep", "min_kl" };
  std::vector<double> p95(opts.n_list.size());
  for (std::size_t s = 0; s < opts.n_list.size(); ++s) {
    std::size_t n = opts.n_list[s];
    double root = std::sqrt(static_cast<double>(n));
    Grid grid(-20.0 / root, 20.0 / root, 1024);
    RestrictedFamily family({ 4.0 / root, 1.0 / std::sqrt(2.0 * static_cast<double>(n)), opts.c0 }, grid);
    std::vector<double> kl(opts.reps);
    parallel_for(opts.reps, [&](std::size_t r) {
      Rng rng = Rng::for_task(opts.seed, "vb-kl-bounded", s * opts.reps + r);
      auto data = model.simulate(n, rng);
      kl[r] = family.min_kl(*model.exact_posterior(data, 1.0, grid));
    });
    for (std::size_t r = 0; r < opts.reps; ++r)
      rep.table.rows.push_back({ static_cast<double>(n), static_cast<double>(r), kl[r] });
    p95[s] = quantile(kl, 0.95);
    rep.metrics["p95" + suffix(n)] = p95[s];
    rep.metrics["median" + suffix(n)] = quantile(kl, 0.5);
  }
  for (std::size_t s = 0; s < p95.size(); ++s)
    rep.record(p95[s] - opts.factor * p95.front());
  rep.pass = rep.violations == 0;
  return rep;
}

SlopeReport hellinger_risk_decay(const BayesModel& model, const RiskDecayOptions& opts)
{
  if (opts.reps < 1)
    throw ParameterError("reps must be at least 1");
  SlopeReport rep;
  rep.seed = opts.seed;
  rep.target = -1.0;
  rep.metrics["max_slope"] = opts.max_slope;
  rep.metrics["alpha"] = opts.alpha;
  if (opts.n_list.size() < 3) {
    rep.insufficient_points = true;
    return rep;
  }
  const std::size_t tasks = opts.n_list.size() * opts.reps;
  std::vector<double> risk(tasks);
  parallel_for(tasks, [&](std::size_t idx) {
    std::size_t n = opts.n_list[idx / opts.reps];
    Rng rng = Rng::for_task(opts.seed, "hellinger-risk-decay", idx);
    auto data = model.simulate(n, rng);
    auto grid = posterior_grid(model, data, opts.alpha);
    OptimizeOptions o;
    o.seed = rng.stream(1).seed();
    auto fit = optimize(model, data, opts.alpha, opts.knots, grid, o);
    risk[idx] = hellinger_risk(q_density(fit.params, grid), model);
  });

  rep.table.columns = { "n", "rep", "hellinger_risk" };
  for (std::size_t s = 0; s < opts.n_list.size(); ++s) {
    std::vector<double> v(risk.begin() + static_cast<std::ptrdiff_t>(s * opts.reps),
                          risk.begin() + static_cast<std::ptrdiff_t>((s + 1) * opts.reps));
    for (std::size_t r = 0; r < v.size(); ++r)
      rep.table.rows.push_back({ static_cast<double>(opts.n_list[s]), static_cast<double>(r), v[r] });
    rep.xs.push_back(static_cast<double>(opts.n_list[s]));
    rep.ys.push_back(mean_of(v));
  }
  auto fit = slope_fit(rep.xs, rep.ys);
  rep.slope = fit.slope;
  rep.r2 = fit.r2;
  rep.pass = fit.slope <= opts.max_slope;
  return rep;
}

CheckReport fbeta_closed_form_check(std::size_t densities, std::uint64_t seed)
{
  if (densities < 1)
    throw ParameterError("need at least one density");
  const Grid g(-1.5, 2.5, 2048);
  const FBetaOptions permissive{ 1.0 };
  constexpr int kMaxDepth = 3;
  std::vector<double> err(densities * (kMaxDepth + 1));
  std::vector<double> sigmas(densities);
  parallel_for(densities, [&](std::size_t t) {
    Rng rng = Rng::for_task(seed, "fbeta-closed-form", t);
    auto f0 = gaussian_mixture(g, random_smooth_mixture(rng));
    sigmas[t] = rng.uniform(0.01, 0.05);
    for (int j = 0; j <= kMaxDepth; ++j) {
      auto a = fbeta_iterative(f0, sigmas[t], j, permissive);
      auto b = fbeta_closed_form(f0, sigmas[t], j, permissive);
      err[t * (kMaxDepth + 1) + static_cast<std::size_t>(j)] = sup_abs_diff(a.signed_values, b.signed_values);
    }
  });

  CheckReport rep;
  rep.name = "fbeta-closed-form";
  rep.seed = seed;
  rep.params = { { "densities", static_cast<double>(densities) }, { "tolerance", kClosedFormTolerance } };
  rep.table.columns = { "density", "sigma", "j", "sup_diff" };
  for (std::size_t t = 0; t < densities; ++t)
    for (int j = 0; j <= kMaxDepth; ++j) {
      double e = err[t * (kMaxDepth + 1) + static_cast<std::size_t>(j)];
      rep.record(e - kClosedFormTolerance);
      rep.table.rows.push_back({ static_cast<double>(t), sigmas[t], static_cast<double>(j), e });
    }
  rep.pass = rep.violations == 0;
  return rep;
}

CheckReport mixture_identity_check(std::size_t densities, const std::vector<double>& sigmas, std::uint64_t seed)
{
  if (densities < 1 || sigmas.empty())
    throw ParameterError("need at least one density and one sigma");
  const Grid g(-1.5, 2.5, 2048);
  const std::size_t ns = sigmas.size();
  std::vector<double> err(densities * ns);
  parallel_for(densities, [&](std::size_t t) {
    Rng rng = Rng::for_task(seed, "mixture-identity", t);
    auto f0 = gaussian_mixture(g, random_smooth_mixture(rng));
    auto mu = quantile_of(f0, 1024);
    for (std::size_t s = 0; s < ns; ++s) {
      auto mix = mixture_density(mu, sigmas[s], g);
      auto conv = convolve_gaussian(f0, sigmas[s]);
      err[t * ns + s] = sup_abs_diff(mix.values(), conv.values());
    }
  });

  CheckReport rep;
  rep.name = "mixture-identity";
  rep.seed = seed;
  rep.params = { { "densities", static_cast<double>(densities) }, { "tolerance", kMixtureIdentityTolerance } };
  rep.table.columns = { "density", "sigma", "sup_diff" };
  for (std::size_t t = 0; t < densities; ++t)
    for (std::size_t s = 0; s < ns; ++s) {
      rep.record(err[t * ns + s] - kMixtureIdentityTolerance);
      rep.table.rows.push_back({ static_cast<double>(t), sigmas[s], err[t * ns + s] });
    }
  rep.pass = rep.violations == 0;
  return rep;
}

} // namespace nllvm
