#include "nllvm/gpivi.hpp"

#include "nllvm/errors.hpp"
#include "nllvm/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace nllvm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_alpha(double alpha)
{
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw ParameterError("alpha must lie in (0, 1]");
}

std::vector<double> trapezoid_weights(const Grid& g)
{
  std::vector<double> w(g.n, g.step());
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

inline double log_sigmoid(double z)
{
  return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

} // namespace

// ---------------------------------------------------------------- models

std::optional<GridDensity> BayesModel::exact_posterior(const std::vector<double>&, double, const Grid&) const
{
  return std::nullopt;
}

GridDensity BayesModel::prior_density(const Grid& g) const
{
  return GridDensity::from_function(g, [this](double t) {
    double lp = log_prior(t);
    return std::isfinite(lp) ? std::exp(lp) : 0.0;
  });
}

NormalMeanModel::NormalMeanModel(double sigma, double theta_star, double lo, double hi, std::size_t grid_n)
  : BayesModel(Grid(lo - 0.25 * (hi - lo), hi + 0.25 * (hi - lo), grid_n), theta_star)
  , sigma_(sigma)
  , lo_(lo)
  , hi_(hi)
{
  if (!(sigma > 0.0))
    throw ParameterError("model sigma must be positive");
  if (!(lo < hi))
    throw ParameterError("prior support needs lo < hi");
}

double NormalMeanModel::log_likelihood(double theta, double y) const
{
  return normal_logpdf(y, theta, sigma_);
}

double NormalMeanModel::log_prior(double theta) const
{
  return (theta >= lo_ && theta <= hi_) ? -std::log(hi_ - lo_) : kNegInf;
}

double NormalMeanModel::kl1(double a, double b) const
{
  double d = (a - b) / sigma_;
  return 0.5 * d * d;
}

double NormalMeanModel::v1(double a, double b) const
{
  double d = (a - b) / sigma_;
  double k = 0.5 * d * d;
  return d * d + k * k;
}

double NormalMeanModel::renyi1(double a, double b, double alpha) const
{
  double d = (a - b) / sigma_;
  return 0.5 * alpha * d * d;
}

double NormalMeanModel::hellinger1(double a, double b) const
{
  double d = (a - b) / sigma_;
  return -std::expm1(-d * d / 8.0);
}

std::vector<double> NormalMeanModel::simulate(std::size_t n, Rng& rng) const
{
  std::vector<double> y(n);
  for (auto& v : y)
    v = rng.normal(theta_star(), sigma_);
  return y;
}

std::optional<GridDensity> NormalMeanModel::exact_posterior(const std::vector<double>& data,
                                                            double alpha,
                                                            const Grid& grid) const
{
  return quadrature_posterior(*this, data, alpha, grid);
}

NormalNormalModel::NormalNormalModel(double sigma, double theta_star, double mu0, double s0, std::size_t grid_n)
  : NormalMeanModel(sigma, theta_star, mu0 - 6.0 * s0, mu0 + 6.0 * s0, grid_n)
  , mu0_(mu0)
  , s0_(s0)
{
  if (!(s0 > 0.0))
    throw ParameterError("prior sd must be positive");
}

double NormalNormalModel::log_prior(double theta) const
{
  return normal_logpdf(theta, mu0_, s0_);
}

NormalNormalModel::Moments NormalNormalModel::posterior_moments(const std::vector<double>& data, double alpha) const
{
  check_alpha(alpha);
  double sum = 0.0;
  for (double y : data)
    sum += y;
  double prec = alpha * static_cast<double>(data.size()) / (sigma_ * sigma_) + 1.0 / (s0_ * s0_);
  double mean = (alpha * sum / (sigma_ * sigma_) + mu0_ / (s0_ * s0_)) / prec;
  return { mean, 1.0 / prec };
}

std::optional<GridDensity> NormalNormalModel::exact_posterior(const std::vector<double>& data,
                                                              double alpha,
                                                              const Grid& grid) const
{
  auto m = posterior_moments(data, alpha);
  return normal_density(grid, m.mean, std::sqrt(m.var));
}

Logistic1DModel::Logistic1DModel(double theta_star, double s0, std::size_t grid_n)
  : BayesModel(Grid(-5.0 * s0, 5.0 * s0, grid_n), theta_star)
  , s0_(s0)
{
  if (!(s0 > 0.0))
    throw ParameterError("prior sd must be positive");
  constexpr std::size_t nx = 401;
  Grid gx(-8.0, 8.0, nx);
  double total = 0.0;
  for (std::size_t i = 0; i < nx; ++i) {
    xs_.push_back(gx.x(i));
    double w = normal_pdf(gx.x(i), 1.0) * ((i == 0 || i + 1 == nx) ? 0.5 : 1.0);
    wx_.push_back(w);
    total += w;
  }
  for (double& w : wx_)
    w /= total;
}

double Logistic1DModel::log_likelihood(double theta, double d) const
{
  return log_sigmoid(theta * d);
}

double Logistic1DModel::log_prior(double theta) const
{
  return normal_logpdf(theta, 0.0, s0_);
}

double Logistic1DModel::kl1(double a, double b) const
{
  double s = 0.0;
  for (std::size_t i = 0; i < xs_.size(); ++i) {
    double x = xs_[i];
    double la1 = log_sigmoid(a * x), la0 = log_sigmoid(-a * x);
    double lb1 = log_sigmoid(b * x), lb0 = log_sigmoid(-b * x);
    s += wx_[i] * (std::exp(la1) * (la1 - lb1) + std::exp(la0) * (la0 - lb0));
  }
  return std::max(s, 0.0);
}

double Logistic1DModel::v1(double a, double b) const
{
  double s = 0.0;
  for (std::size_t i = 0; i < xs_.size(); ++i) {
    double x = xs_[i];
    double la1 = log_sigmoid(a * x), la0 = log_sigmoid(-a * x);
    double r1 = la1 - log_sigmoid(b * x), r0 = la0 - log_sigmoid(-b * x);
    s += wx_[i] * (std::exp(la1) * r1 * r1 + std::exp(la0) * r0 * r0);
  }
  return s;
}

double Logistic1DModel::renyi1(double a, double b, double alpha) const
{
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ParameterError("Renyi order must lie in (0, 1)");
  double s = 0.0;
  for (std::size_t i = 0; i < xs_.size(); ++i) {
    double x = xs_[i];
    double t1 = alpha * log_sigmoid(a * x) + (1.0 - alpha) * log_sigmoid(b * x);
    double t0 = alpha * log_sigmoid(-a * x) + (1.0 - alpha) * log_sigmoid(-b * x);
    s += wx_[i] * (std::exp(t1) + std::exp(t0));
  }
  return std::max(std::log(s) / (alpha - 1.0), 0.0);
}

double Logistic1DModel::hellinger1(double a, double b) const
{
  double s = 0.0;
  for (std::size_t i = 0; i < xs_.size(); ++i) {
    double x = xs_[i];
    double t1 = 0.5 * (log_sigmoid(a * x) + log_sigmoid(b * x));
    double t0 = 0.5 * (log_sigmoid(-a * x) + log_sigmoid(-b * x));
    s += wx_[i] * (std::exp(t1) + std::exp(t0));
  }
  return std::max(1.0 - s, 0.0);
}

std::vector<double> Logistic1DModel::simulate(std::size_t n, Rng& rng) const
{
  std::vector<double> d(n);
  for (auto& v : d) {
    double x = rng.normal();
    bool y = rng.uniform() < std::exp(log_sigmoid(theta_star() * x));
    v = y ? x : -x;
  }
  return d;
}

GridDensity quadrature_posterior(const BayesModel& model,
                                 const std::vector<double>& data,
                                 double alpha,
                                 const Grid& grid)
{
  check_alpha(alpha);
  std::vector<double> lp(grid.n);
  double top = kNegInf;
  for (std::size_t g = 0; g < grid.n; ++g) {
    double t = grid.x(g);
    double v = model.log_prior(t);
    if (std::isfinite(v))
      for (double y : data)
        v += alpha * model.log_likelihood(t, y);
    lp[g] = v;
    top = std::max(top, v);
  }
  if (!std::isfinite(top))
    throw NumericError("posterior vanishes on the grid", 0);
  for (double& v : lp)
    v = std::isfinite(v) ? std::exp(v - top) : 0.0;
  return GridDensity(grid, std::move(lp));
}

Grid posterior_grid(const BayesModel& model, const std::vector<double>& data, double alpha, std::size_t n, double width)
{
  const Grid& full = model.grid();
  Grid g = full;
  for (int pass = 0; pass < 2; ++pass) {
    auto post = quadrature_posterior(model, data, alpha, g);
    double m = post.mean();
    double sd = std::sqrt(std::max(post.variance(), 0.0));
    if (!(sd > 0.0))
      sd = 2.0 * g.step();
    double lo = std::max(full.lo, m - width * sd);
    double hi = std::min(full.hi, m + width * sd);
    g = Grid(lo, hi, n);
  }
  return g;
}

// ------------------------------------------------------- variational family

TransferFunction normal_quantile_map(double m, double tau, std::size_t n_knots)
{
  if (n_knots < 2)
    throw ParameterError("quantile map needs at least two knots");
  if (!(tau > 0.0))
    throw ParameterError("tau must be positive");
  constexpr double clip = 1e-6;
  std::vector<double> knots(n_knots), values(n_knots);
  for (std::size_t k = 0; k < n_knots; ++k) {
    double t = 0.5 * (1.0 - std::cos(M_PI * static_cast<double>(k) / static_cast<double>(n_knots - 1)));
    knots[k] = t;
    values[k] = m + tau * std_normal_quantile(std::clamp(t, clip, 1.0 - clip));
  }
  knots.front() = 0.0;
  knots.back() = 1.0;
  return TransferFunction(std::move(knots), std::move(values));
}

GridDensity q_density(const VariationalParams& params, const Grid& grid)
{
  if (!std::isfinite(params.log_sigma))
    throw ParameterError("log sigma must be finite");
  return mixture_density(params.mu, params.sigma(), grid);
}

bool kl_ball_contains(const KLBallSpec& spec, const BayesModel& model, double theta)
{
  if (!model.iid())
    throw UnsupportedError("KL ball membership needs an IID model");
  if (!(spec.eps > 0.0) || spec.n < 1)
    throw ParameterError("KL ball needs eps > 0 and n >= 1");
  const double n = static_cast<double>(spec.n);
  const double r = n * spec.eps * spec.eps;
  return n * model.kl1(spec.theta_star, theta) <= r && n * model.v1(spec.theta_star, theta) <= r;
}

// --------------------------------------------------------------- objective

VBObjective::VBObjective(const BayesModel& model, const std::vector<double>& data, double alpha, const Grid& grid)
  : model_(model)
  , alpha_(alpha)
  , grid_(grid)
  , loglik_(grid.n, 0.0)
  , logprior_(grid.n)
{
  check_alpha(alpha);
  if (data.empty())
    throw EmptyDataError("objective needs data");
  for (std::size_t g = 0; g < grid.n; ++g) {
    double t = grid.x(g);
    double s = 0.0;
    for (double y : data)
      s += model.log_likelihood(t, y);
    loglik_[g] = s;
    logprior_[g] = model.log_prior(t);
  }
  for (double y : data)
    loglik_star_ += model.log_likelihood(model.theta_star(), y);
}

double VBObjective::neg_log_lik(const GridDensity& q) const
{
  auto w = trapezoid_weights(grid_);
  double s = 0.0;
  for (std::size_t g = 0; g < grid_.n; ++g)
    if (q[g] > 0.0)
      s -= w[g] * q[g] * loglik_[g];
  return s;
}

double VBObjective::model_fit(const GridDensity& q) const
{
  return loglik_star_ + neg_log_lik(q);
}

double VBObjective::prior_kl(const GridDensity& q, double lost_mass) const
{
  auto w = trapezoid_weights(grid_);
  // Mass beyond the window only counts when the prior support ends there.
  const bool open_left = std::isfinite(model_.log_prior(grid_.lo - grid_.step()));
  const bool open_right = std::isfinite(model_.log_prior(grid_.hi + grid_.step()));
  double outside = (open_left && open_right) ? 0.0 : lost_mass;
  double kl = 0.0;
  for (std::size_t g = 0; g < grid_.n; ++g) {
    if (!(q[g] > 0.0))
      continue;
    if (!std::isfinite(logprior_[g])) {
      outside += w[g] * q[g];
      continue;
    }
    kl += w[g] * q[g] * (std::log(q[g]) - logprior_[g]);
  }
  if (outside > kMaxOutsideSupportMass) {
    std::ostringstream os;
    os << "variational density puts " << outside << " mass outside the prior support";
    throw SupportError(os.str());
  }
  return kl;
}

double VBObjective::operator()(const GridDensity& q, double lost_mass) const
{
  return alpha_ * neg_log_lik(q) + prior_kl(q, lost_mass);
}

double VBObjective::operator()(const VariationalParams& params) const
{
  double lost = 0.0;
  auto q = mixture_density(params.mu, params.sigma(), grid_, lost);
  return (*this)(q, lost);
}

double practical_objective(const VariationalParams& params,
                           const BayesModel& model,
                           const std::vector<double>& data,
                           double alpha,
                           const Grid& grid)
{
  return VBObjective(model, data, alpha, grid)(params);
}

PsiDiagnostic psi_diagnostic(const VariationalParams& params,
                             const BayesModel& model,
                             const std::vector<double>& data,
                             double alpha,
                             const Grid& grid)
{
  VBObjective obj(model, data, alpha, grid);
  double lost = 0.0;
  auto q = mixture_density(params.mu, params.sigma(), grid, lost);
  PsiDiagnostic d;
  d.alpha = alpha;
  d.model_fit = obj.model_fit(q);
  d.prior_kl = obj.prior_kl(q, lost);
  d.psi = d.model_fit + d.prior_kl / alpha;
  return d;
}

// --------------------------------------------------------------- optimizer

OptimizeResult optimize(const BayesModel& model,
                        const std::vector<double>& data,
                        double alpha,
                        std::size_t knots,
                        const Grid& grid,
                        const OptimizeOptions& opt)
{
  if (knots < kMinVIKnots || knots > kMaxVIKnots)
    throw ParameterError("knot count must lie in [8, 256]");
  VBObjective obj(model, data, alpha, grid);

  VariationalParams start;
  if (opt.init) {
    start = *opt.init;
  } else {
    auto post = quadrature_posterior(model, data, alpha, grid);
    double sd = std::sqrt(std::max(post.variance(), grid.step() * grid.step()));
    auto base = normal_quantile_map(post.mean(), sd / std::sqrt(2.0), knots);
    Rng rng = Rng::for_task(opt.seed, "vi", 0);
    auto v = base.values();
    for (double& x : v)
      x += 1e-3 * sd * rng.normal();
    std::sort(v.begin(), v.end());
    start.mu = TransferFunction(base.knots(), v);
    start.log_sigma = std::log(sd / std::sqrt(2.0));
  }

  const std::vector<double> knot_x = start.mu.knots();
  std::vector<double> x = start.mu.values();
  x.push_back(start.log_sigma);
  const std::size_t dim = x.size();

  auto params_of = [&](const std::vector<double>& v) {
    VariationalParams p;
    p.mu = TransferFunction(knot_x, std::vector<double>(v.begin(), v.end() - 1));
    p.log_sigma = v.back();
    return p;
  };
  auto f = [&](const std::vector<double>& v) {
    try {
      double r = obj(params_of(v));
      return std::isfinite(r) ? r : std::numeric_limits<double>::infinity();
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  OptimizeResult res;
  double cur = obj(params_of(x));
  res.initial_objective = cur;
  res.trace.push_back(cur);
  std::vector<double> best = x;
  double best_f = cur;

  for (std::size_t sweep = 0; sweep < opt.iters; ++sweep) {
    const double before = cur;
    std::size_t moved = 0;
    for (std::size_t c = 0; c < dim; ++c) {
      const double x0 = x[c];
      const double h = 1e-4 * std::max(std::abs(x0), 1.0);
      x[c] = x0 + h;
      double fp = f(x);
      x[c] = x0 - h;
      double fm = f(x);
      x[c] = x0;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        continue;
      double g = (fp - fm) / (2.0 * h);
      double curv = (fp - 2.0 * cur + fm) / (h * h);
      double step = curv > 0.0 ? -g / curv : -std::copysign(10.0 * h, g);
      bool accepted = false;
      for (int k = 0; k < 30 && step != 0.0; ++k) {
        x[c] = x0 + step;
        double ft = f(x);
        if (ft < cur) {
          cur = ft;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) {
        x[c] = x0;
        if (std::min(fp, fm) < cur) {
          x[c] = fp < fm ? x0 + h : x0 - h;
          cur = std::min(fp, fm);
          accepted = true;
        }
      }
      moved += accepted;
    }
    // Monotone projection of the knot values.
    std::sort(x.begin(), x.end() - 1);
    double projected = f(x);
    ++res.sweeps;
    if (projected < best_f) {
      best_f = projected;
      best = x;
    }
    res.trace.push_back(projected);
    if (projected > before) {
      res.stalled = true;
      break;
    }
    cur = projected;
    if (std::abs(before - cur) <= opt.tolerance * std::max(std::abs(before), 1.0)) {
      res.converged = true;
      break;
    }
    if (moved == 0) {
      res.stalled = true;
      break;
    }
  }
  res.params = params_of(best);
  res.objective = best_f;
  return res;
}

// ------------------------------------------------------ restricted family

RestrictedFamily::RestrictedFamily(const RestrictedFamilySpec& spec, const Grid& grid, std::size_t knots)
{
  if (!(spec.M > 0.0 && spec.sigma_n > 0.0 && spec.c0 >= 1.0))
    throw ParameterError("restricted family needs M > 0, sigma_n > 0, c0 >= 1");
  const double tau_hi = std::sqrt(spec.c0) * spec.sigma_n;
  for (std::size_t i = 0; i < kFamilyMeans; ++i) {
    double m = -spec.M + 2.0 * spec.M * static_cast<double>(i) / static_cast<double>(kFamilyMeans - 1);
    for (std::size_t j = 0; j < kFamilyScales; ++j) {
      double tau = spec.sigma_n + (tau_hi - spec.sigma_n) * static_cast<double>(j) / static_cast<double>(kFamilyScales - 1);
      VariationalParams p{ normal_quantile_map(m, tau, knots), std::log(spec.sigma_n) };
      members_.push_back(q_density(p, grid));
    }
  }
}

double RestrictedFamily::min_kl(const GridDensity& target) const
{
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : members_)
    best = std::min(best, divergence(DivergenceKind::kl(), q, target));
  return std::max(best, 0.0);
}

double restricted_min_kl(const RestrictedFamilySpec& spec,
                         const BayesModel& model,
                         const std::vector<double>& data,
                         const Grid& grid)
{
  auto post = model.exact_posterior(data, 1.0, grid);
  if (!post)
    throw UnsupportedError("restricted_min_kl needs an exact posterior");
  return RestrictedFamily(spec, grid).min_kl(*post);
}

// -------------------------------------------------------------- risk bound

double risk_integral(const GridDensity& q, const BayesModel& model, double alpha)
{
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ParameterError("Renyi order must lie in (0, 1)");
  const Grid& g = q.grid();
  auto w = trapezoid_weights(g);
  double s = 0.0;
  for (std::size_t i = 0; i < g.n; ++i)
    if (q[i] > 0.0)
      s += w[i] * q[i] * model.renyi1(g.x(i), model.theta_star(), alpha);
  return std::max(s, 0.0);
}

double risk_integral(const VariationalParams& params, const BayesModel& model, double alpha, const Grid& grid)
{
  return risk_integral(q_density(params, grid), model, alpha);
}

double hellinger_risk(const GridDensity& q, const BayesModel& model)
{
  const Grid& g = q.grid();
  auto w = trapezoid_weights(g);
  double s = 0.0;
  for (std::size_t i = 0; i < g.n; ++i)
    if (q[i] > 0.0)
      s += w[i] * q[i] * model.hellinger1(g.x(i), model.theta_star());
  return s;
}

BallMass ball_mass(const KLBallSpec& spec, const BayesModel& model)
{
  const Grid& g = model.grid();
  const double ts = spec.theta_star;
  if (ts < g.lo || ts > g.hi)
    throw ParameterError("ball centre lies outside the model grid");
  auto in = [&](double t) { return kl_ball_contains(spec, model, t); };

  auto centre = static_cast<std::size_t>(std::clamp(std::round((ts - g.lo) / g.step()), 0.0, static_cast<double>(g.n - 1)));
  std::size_t first = g.n, last = 0;
  for (std::size_t i = 0; i < g.n; ++i)
    if (in(g.x(i))) {
      first = std::min(first, i);
      last = std::max(last, i);
    }
  if (first == g.n)
    throw ResolutionError("KL ball contains no grid point; refine the grid or enlarge eps");
  // The ball is an interval around theta*; walk out from the centre.
  std::size_t a = centre, b = centre;
  while (a > 0 && in(g.x(a - 1)))
    --a;
  while (b + 1 < g.n && in(g.x(b + 1)))
    ++b;
  if (!in(g.x(centre))) {
    a = first;
    b = last;
  }

  auto refine = [&](double inside, double outside) {
    for (int k = 0; k < 60; ++k) {
      double mid = 0.5 * (inside + outside);
      (in(mid) ? inside : outside) = mid;
    }
    return inside;
  };
  BallMass out;
  out.lo = a > 0 ? refine(g.x(a), g.x(a - 1)) : g.lo;
  out.hi = b + 1 < g.n ? refine(g.x(b), g.x(b + 1)) : g.hi;

  constexpr std::size_t m = 4097;
  double h = (out.hi - out.lo) / static_cast<double>(m - 1);
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double lp = model.log_prior(out.lo + h * static_cast<double>(i));
    double v = std::isfinite(lp) ? std::exp(lp) : 0.0;
    s += (i == 0 || i + 1 == m) ? 0.5 * v : v;
  }
  out.mass = s * h;
  if (!(out.mass > 0.0))
    throw ResolutionError("KL ball has zero prior mass");
  return out;
}

RiskBound risk_bound_rhs(const BayesModel& model, std::size_t n, double alpha, double eps, double D_const)
{
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ParameterError("alpha must lie in (0, 1)");
  if (!(D_const > 1.0))
    throw ParameterError("D must exceed 1");
  if (n < 1 || !(eps > 0.0))
    throw ParameterError("need n >= 1 and eps > 0");
  RiskBound r;
  auto ball = ball_mass({ model.theta_star(), eps, n }, model);
  const double nd = static_cast<double>(n);
  r.ball_mass = std::min(ball.mass, 1.0);
  r.log_inv_mass = -std::log(r.ball_mass);
  r.complexity = r.log_inv_mass / (nd * (1.0 - alpha));
  r.bound = D_const * alpha / (1.0 - alpha) * eps * eps + r.complexity;
  r.remainder = std::log((D_const - 1.0) * (D_const - 1.0) * nd * eps * eps) / (nd * (1.0 - alpha));
  r.a1_holds = r.log_inv_mass <= nd * eps * eps;
  r.a1_printed_holds = r.log_inv_mass <= -nd * eps * eps;
  return r;
}

} // namespace nllvm
