#include "nllvm/nllvm_posterior.hpp"

#include "nllvm/errors.hpp"
#include "nllvm/log.hpp"
#include "nllvm/numeric.hpp"
#include "nllvm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace nllvm {

namespace {

void check_state(const NLLVMState& state, const std::vector<double>& data)
{
  if (state.mu_values.size() < 2)
    throw ShapeError("state needs at least two knot values");
  if (state.eta.size() != data.size())
    throw ShapeError("state has one latent per observation");
  if (!(state.sigma > 0.0) || !std::isfinite(state.sigma))
    throw ParameterError("state sigma must be positive and finite");
}

// Prior factor of the knot values, shared between updates within a run.
struct KnotPrior
{
  std::size_t k = 0;
  Eigen::MatrixXd chol;

  KnotPrior(const GPPriorConfig& cfg, std::size_t n_knots)
    : k(n_knots)
  {
    cfg.validate();
    if (cfg.rescale.kind != RescaleDist::Kind::Fixed)
      throw ParameterError("the sampler needs a fixed rescale");
    if (n_knots < kMinPathKnots || n_knots > kMaxPathKnots)
      throw ParameterError("knot count must lie in [16, 1024]");
    chol = jittered_cholesky(se_kernel(uniform_knots(n_knots), cfg.variance, cfg.rescale.value), cfg.jitter);
  }

  double log_density(const std::vector<double>& m) const
  {
    Eigen::Map<const Eigen::VectorXd> v(m.data(), static_cast<Eigen::Index>(m.size()));
    Eigen::VectorXd z = chol.triangularView<Eigen::Lower>().solve(v);
    return -0.5 * z.squaredNorm() - chol.diagonal().array().log().sum() - static_cast<double>(k) * kLogSqrt2Pi;
  }
};

// Interpolation cell and weight of eta on k uniform knots.
inline void hat(double eta, std::size_t k, std::size_t& cell, double& w)
{
  double t = eta * static_cast<double>(k - 1);
  auto c = static_cast<std::size_t>(std::floor(t));
  if (c >= k - 1)
    c = k - 2;
  cell = c;
  w = t - static_cast<double>(c);
}

inline double mu_at(const std::vector<double>& m, double eta)
{
  std::size_t c;
  double w;
  hat(eta, m.size(), c, w);
  return (1.0 - w) * m[c] + w * m[c + 1];
}

double residual_ss(const NLLVMState& s, const std::vector<double>& data)
{
  double ssr = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    double r = data[i] - mu_at(s.mu_values, s.eta[i]);
    ssr += r * r;
  }
  return ssr;
}

struct Posterior
{
  Eigen::VectorXd mean;
  Eigen::MatrixXd prec_chol; // lower factor of P
};

// Whitened conjugate posterior of z with m = L z.
Posterior whitened_posterior(const KnotPrior& prior,
                             const std::vector<double>& eta,
                             const std::vector<double>& data,
                             double sigma)
{
  const auto k = static_cast<Eigen::Index>(prior.k);
  Eigen::MatrixXd btb = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd bty = Eigen::VectorXd::Zero(k);
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::size_t c;
    double w;
    hat(eta[i], prior.k, c, w);
    auto a = static_cast<Eigen::Index>(c);
    btb(a, a) += (1.0 - w) * (1.0 - w);
    btb(a + 1, a + 1) += w * w;
    btb(a, a + 1) += (1.0 - w) * w;
    btb(a + 1, a) += (1.0 - w) * w;
    bty[a] += (1.0 - w) * data[i];
    bty[a + 1] += w * data[i];
  }
  const double inv_s2 = 1.0 / (sigma * sigma);
  Eigen::MatrixXd p = prior.chol.transpose() * btb * prior.chol * inv_s2;
  p.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(p);
  if (llt.info() != Eigen::Success)
    throw ConditioningError("posterior precision is not positive definite");
  Posterior out;
  out.prec_chol = llt.matrixL();
  out.mean = llt.solve(prior.chol.transpose() * bty * inv_s2);
  return out;
}

void draw_transfer(NLLVMState& state, const std::vector<double>& data, const KnotPrior& prior, Rng& rng)
{
  auto post = whitened_posterior(prior, state.eta, data, state.sigma);
  Eigen::VectorXd e(post.mean.size());
  for (Eigen::Index i = 0; i < e.size(); ++i)
    e[i] = rng.normal();
  Eigen::VectorXd z = post.mean + post.prec_chol.transpose().triangularView<Eigen::Upper>().solve(e);
  Eigen::VectorXd m = prior.chol.triangularView<Eigen::Lower>() * z;
  if (!m.allFinite())
    throw NumericError("non-finite transfer draw", 0);
  state.mu_values.assign(m.data(), m.data() + m.size());
}

double sigma_log_target(double s, double n, double ssr, const GPPriorConfig& cfg)
{
  double sig = std::exp(s);
  return -n * s - ssr / (2.0 * sig * sig) + inverse_gamma_logpdf(sig, cfg.a_sigma, cfg.b_sigma) + s;
}

void sigma_moves(NLLVMState& state,
                 std::size_t n,
                 double ssr,
                 const GPPriorConfig& cfg,
                 Rng& rng,
                 SigmaProposal& proposal,
                 int steps)
{
  double s = std::log(state.sigma);
  double cur = sigma_log_target(s, static_cast<double>(n), ssr, cfg);
  for (int t = 0; t < steps; ++t) {
    double prop = s + proposal.step * rng.normal();
    double next = sigma_log_target(prop, static_cast<double>(n), ssr, cfg);
    ++proposal.proposed;
    if (std::log(rng.uniform()) < next - cur) {
      s = prop;
      cur = next;
      ++proposal.accepted;
    }
  }
  state.sigma = std::exp(s);
}

double joint_log_post(const NLLVMState& s, const std::vector<double>& data, const GPPriorConfig& cfg, const KnotPrior& prior)
{
  double lp = prior.log_density(s.mu_values) + inverse_gamma_logpdf(s.sigma, cfg.a_sigma, cfg.b_sigma);
  for (std::size_t i = 0; i < data.size(); ++i)
    lp += normal_logpdf(data[i], mu_at(s.mu_values, s.eta[i]), s.sigma);
  return lp;
}

} // namespace

std::size_t update_latents(NLLVMState& state, const std::vector<double>& data, Rng& rng)
{
  check_state(state, data);
  const auto& m = state.mu_values;
  const std::size_t k = m.size();
  const double sigma = state.sigma;

  // Cell values of mu and, per knot segment, the cell range and value span.
  std::vector<double> cell_mu(kLatentGrid);
  std::vector<std::size_t> seg_of(kLatentGrid);
  for (std::size_t c = 0; c < kLatentGrid; ++c) {
    double x = (static_cast<double>(c) + 0.5) / static_cast<double>(kLatentGrid);
    std::size_t s;
    double w;
    hat(x, k, s, w);
    cell_mu[c] = (1.0 - w) * m[s] + w * m[s + 1];
    seg_of[c] = s;
  }
  struct Segment
  {
    std::size_t first, last;
    double lo, hi;
  };
  std::vector<Segment> segs;
  for (std::size_t c = 0; c < kLatentGrid; ++c) {
    if (segs.empty() || seg_of[c] != seg_of[segs.back().first]) {
      segs.push_back({ c, c + 1, cell_mu[c], cell_mu[c] });
    } else {
      auto& b = segs.back();
      b.last = c + 1;
      b.lo = std::min(b.lo, cell_mu[c]);
      b.hi = std::max(b.hi, cell_mu[c]);
    }
  }

  const double reach = kLatentWindow * sigma;
  const double inv2s2 = 0.5 / (sigma * sigma);
  std::vector<std::size_t> cells;
  std::vector<double> cum;
  cells.reserve(kLatentGrid);
  cum.reserve(kLatentGrid);
  std::size_t fallbacks = 0;
  const double cell_w = 1.0 / static_cast<double>(kLatentGrid);

  for (std::size_t i = 0; i < data.size(); ++i) {
    const double y = data[i];
    cells.clear();
    double dmin = std::numeric_limits<double>::infinity();
    for (const auto& sg : segs) {
      if (y < sg.lo - reach || y > sg.hi + reach)
        continue;
      for (std::size_t c = sg.first; c < sg.last; ++c) {
        cells.push_back(c);
        double d = y - cell_mu[c];
        dmin = std::min(dmin, d * d);
      }
    }
    if (cells.empty() || dmin * inv2s2 > 0.5 * kLatentWindow * kLatentWindow) {
      ++fallbacks;
      state.eta[i] = rng.uniform();
      continue;
    }
    cum.resize(cells.size());
    double total = 0.0;
    for (std::size_t j = 0; j < cells.size(); ++j) {
      double d = y - cell_mu[cells[j]];
      total += std::exp(-(d * d - dmin) * inv2s2);
      cum[j] = total;
    }
    double u = rng.uniform() * total;
    auto j = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
    if (j >= cells.size())
      j = cells.size() - 1;
    double eta = (static_cast<double>(cells[j]) + rng.uniform()) * cell_w;
    state.eta[i] = std::clamp(eta, 0.0, 1.0);
  }
  if (fallbacks) {
    std::ostringstream os;
    os << "update_latents: " << fallbacks << " observation(s) beyond " << kLatentWindow
       << " sigma of the transfer range; drew their latents uniformly";
    warn(os.str());
  }
  return fallbacks;
}

void update_transfer(NLLVMState& state, const std::vector<double>& data, const GPPriorConfig& cfg, Rng& rng)
{
  check_state(state, data);
  KnotPrior prior(cfg, state.mu_values.size());
  draw_transfer(state, data, prior, rng);
}

void update_sigma(NLLVMState& state,
                  const std::vector<double>& data,
                  const GPPriorConfig& cfg,
                  Rng& rng,
                  SigmaProposal& proposal,
                  int steps)
{
  check_state(state, data);
  cfg.validate();
  sigma_moves(state, data.size(), residual_ss(state, data), cfg, rng, proposal, steps);
}

std::vector<double> transfer_posterior_mean(const std::vector<double>& eta,
                                            const std::vector<double>& data,
                                            double sigma,
                                            const GPPriorConfig& cfg,
                                            std::size_t n_knots)
{
  if (eta.size() != data.size())
    throw ShapeError("one latent per observation");
  if (!(sigma > 0.0))
    throw ParameterError("sigma must be positive");
  KnotPrior prior(cfg, n_knots);
  auto post = whitened_posterior(prior, eta, data, sigma);
  Eigen::VectorXd m = prior.chol.triangularView<Eigen::Lower>() * post.mean;
  return { m.data(), m.data() + m.size() };
}

double log_posterior(const NLLVMState& state, const std::vector<double>& data, const GPPriorConfig& cfg)
{
  check_state(state, data);
  return joint_log_post(state, data, cfg, KnotPrior(cfg, state.mu_values.size()));
}

GPPriorConfig default_mcmc_config()
{
  GPPriorConfig cfg;
  cfg.rescale = RescaleDist::fixed(kDefaultRescaleMcmc);
  return cfg;
}

NLLVMState initial_state(const std::vector<double>& data, std::size_t n_knots)
{
  if (data.empty())
    throw EmptyDataError("no observations");
  if (n_knots < 2)
    throw ParameterError("need at least two knots");
  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{ 0 });
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return data[a] < data[b]; });

  NLLVMState s;
  s.eta.resize(n);
  std::vector<double> sorted(n);
  for (std::size_t r = 0; r < n; ++r) {
    s.eta[order[r]] = (static_cast<double>(r) + 0.5) / static_cast<double>(n);
    sorted[r] = data[order[r]];
  }
  s.mu_values.resize(n_knots);
  for (std::size_t j = 0; j < n_knots; ++j) {
    double pos = static_cast<double>(j) / static_cast<double>(n_knots - 1) * static_cast<double>(n - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi = std::min(lo + 1, n - 1);
    double w = pos - static_cast<double>(lo);
    s.mu_values[j] = (1.0 - w) * sorted[lo] + w * sorted[hi];
  }
  double mean = std::accumulate(data.begin(), data.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double y : data)
    var += (y - mean) * (y - mean);
  var /= static_cast<double>(std::max<std::size_t>(n - 1, 1));
  s.sigma = 0.1 * std::sqrt(var) + 1e-3;
  return s;
}

PosteriorSamples fit_mcmc(const std::vector<double>& data, const GPPriorConfig& cfg, const MCMCOptions& opts)
{
  if (data.size() < 10)
    throw ParameterError("the sampler needs at least 10 observations");
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!std::isfinite(data[i]))
      throw NumericError("non-finite observation", i);
  if (opts.iters <= opts.burn_in)
    throw ParameterError("iters must exceed burn_in");
  if (opts.thin < 1)
    throw ParameterError("thin must be at least 1");
  if (opts.sigma_steps < 1)
    throw ParameterError("sigma_steps must be at least 1");

  KnotPrior prior(cfg, opts.n_knots);
  NLLVMState state = opts.init ? *opts.init : initial_state(data, opts.n_knots);
  check_state(state, data);
  if (state.mu_values.size() != opts.n_knots)
    throw ShapeError("initial state has the wrong number of knots");

  PosteriorSamples out;
  out.options = opts;
  out.config = cfg;
  out.seed = opts.seed;
  out.log_post_trace.reserve(opts.iters);

  Rng rng = Rng::for_task(opts.seed, "mcmc", 0);
  SigmaProposal prop;
  SigmaProposal window;
  SigmaProposal kept;
  constexpr std::size_t kAdaptEvery = 50;

  for (std::size_t t = 0; t < opts.iters; ++t) {
    out.latent_fallbacks += update_latents(state, data, rng);
    draw_transfer(state, data, prior, rng);

    SigmaProposal step;
    step.step = prop.step;
    sigma_moves(state, data.size(), residual_ss(state, data), cfg, rng, step, opts.sigma_steps);
    if (t < opts.burn_in) {
      window.proposed += step.proposed;
      window.accepted += step.accepted;
      if ((t + 1) % kAdaptEvery == 0) {
        double r = window.rate();
        if (r > 0.4)
          prop.step *= 1.2;
        else if (r < 0.2)
          prop.step /= 1.2;
        window = SigmaProposal{};
      }
    } else {
      kept.proposed += step.proposed;
      kept.accepted += step.accepted;
    }

    state.log_post = joint_log_post(state, data, cfg, prior);
    if (!std::isfinite(state.log_post)) {
      std::ostringstream os;
      os << "non-finite log posterior at cycle " << t;
      throw NumericError(os.str(), t);
    }
    out.log_post_trace.push_back(state.log_post);
    if (t >= opts.burn_in && (t - opts.burn_in) % opts.thin == 0)
      out.states.push_back(state);
  }

  out.acceptance["sigma"] = kept.rate();
  out.acceptance["latents"] = 1.0;
  out.acceptance["transfer"] = 1.0;
  out.sigma_step = prop.step;
  return out;
}

GridDensity predictive_density(const PosteriorSamples& samples, const Grid& grid)
{
  if (samples.states.empty())
    throw ParameterError("no kept states");
  std::vector<double> acc(grid.n, 0.0);
  for (const auto& s : samples.states) {
    auto f = mixture_density(s.transfer(), s.sigma, grid);
    for (std::size_t i = 0; i < grid.n; ++i)
      acc[i] += f[i];
  }
  for (double& v : acc)
    v /= static_cast<double>(samples.states.size());
  return GridDensity(grid, std::move(acc));
}

Grid predictive_grid(const PosteriorSamples& samples, const Grid& base)
{
  double lo = base.lo, hi = base.hi;
  for (const auto& s : samples.states) {
    auto [mn, mx] = std::minmax_element(s.mu_values.begin(), s.mu_values.end());
    lo = std::min(lo, *mn - 9.0 * s.sigma);
    hi = std::max(hi, *mx + 9.0 * s.sigma);
  }
  const double h = base.step();
  auto left = static_cast<std::size_t>(std::ceil((base.lo - lo) / h));
  auto right = static_cast<std::size_t>(std::ceil((hi - base.hi) / h));
  return base.padded(left, right);
}

double rate_log_exponent(double beta, double q)
{
  if (!(beta > 0.0))
    throw ParameterError("beta must be positive");
  return beta * std::max(2.0, q) / (2.0 * beta + 1.0) + 1.0;
}

double target_rate(double n, double beta, double q)
{
  if (!(n > 1.0))
    throw ParameterError("target rate needs n > 1");
  return std::pow(n, -beta / (2.0 * beta + 1.0)) * std::pow(std::log(n), rate_log_exponent(beta, q));
}

SlopeReport contraction_experiment(const GridDensity& f0, const GPPriorConfig& cfg, const ContractionOptions& opts)
{
  SlopeReport rep;
  rep.seed = opts.seed;
  rep.target = -opts.beta / (2.0 * opts.beta + 1.0);
  rep.metrics["log_exponent"] = rate_log_exponent(opts.beta, opts.q);
  if (opts.reps < 1)
    throw ParameterError("reps must be at least 1");
  for (std::size_t i = 1; i < opts.n_list.size(); ++i)
    if (opts.n_list[i] <= opts.n_list[i - 1])
      throw ParameterError("n_list must be increasing");
  if (opts.n_list.size() < 3) {
    rep.insufficient_points = true;
    for (auto n : opts.n_list)
      rep.xs.push_back(static_cast<double>(n));
    return rep;
  }
  if (static_cast<double>(opts.n_list.back()) < 16.0 * static_cast<double>(opts.n_list.front()))
    throw ParameterError("n_list must span at least a factor of 16");

  const std::size_t sizes = opts.n_list.size();
  const std::size_t tasks = sizes * opts.reps;
  std::vector<double> h(tasks, std::numeric_limits<double>::quiet_NaN());
  std::vector<char> failed(tasks, 0);
  parallel_for(tasks, [&](std::size_t idx) {
    std::size_t n = opts.n_list[idx / opts.reps];
    Rng rng = Rng::for_task(opts.seed, "contract", idx);
    try {
      auto data = f0.sample(n, rng);
      MCMCOptions m = opts.mcmc;
      m.seed = rng.stream(1).seed();
      m.init.reset();
      auto post = fit_mcmc(data, cfg, m);
      // Compare on f0's grid extended to hold every kept component.
      Grid wide = predictive_grid(post, f0.grid());
      auto left = static_cast<std::size_t>(std::llround((f0.grid().lo - wide.lo) / wide.step()));
      auto pred = predictive_density(post, wide);
      h[idx] = std::sqrt(divergence(DivergenceKind::hellinger_sq(), pred, f0.padded(left, wide.n - f0.size() - left)));
    } catch (const Error& e) {
      failed[idx] = 1;
      warn(std::string("contraction fit aborted: ") + e.what());
    }
  });

  std::size_t aborted = 0;
  for (std::size_t idx = 0; idx < tasks; ++idx) {
    aborted += failed[idx];
    rep.table.rows.push_back(
      { static_cast<double>(opts.n_list[idx / opts.reps]), static_cast<double>(idx % opts.reps), h[idx] });
  }
  rep.table.columns = { "n", "rep", "hellinger" };
  rep.metrics["aborted_fits"] = static_cast<double>(aborted);
  if (aborted) {
    rep.invalid = true;
    return rep;
  }

  for (std::size_t s = 0; s < sizes; ++s) {
    std::vector<double> v(h.begin() + static_cast<std::ptrdiff_t>(s * opts.reps),
                          h.begin() + static_cast<std::ptrdiff_t>((s + 1) * opts.reps));
    std::sort(v.begin(), v.end());
    double med = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    rep.xs.push_back(static_cast<double>(opts.n_list[s]));
    rep.ys.push_back(med);
    rep.metrics["target_rate_n" + std::to_string(opts.n_list[s])] =
      target_rate(static_cast<double>(opts.n_list[s]), opts.beta, opts.q);
  }
  auto fit = slope_fit(rep.xs, rep.ys);
  rep.slope = fit.slope;
  rep.r2 = fit.r2;
  bool decreasing = true;
  for (std::size_t s = 1; s < sizes; ++s)
    decreasing = decreasing && rep.ys[s] < rep.ys[s - 1];
  rep.pass = decreasing;
  return rep;
}

} // namespace nllvm
