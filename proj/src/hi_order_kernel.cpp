#include "nllvm/hi_order_kernel.hpp"

#include "nllvm/errors.hpp"
#include "nllvm/numeric.hpp"
#include "nllvm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nllvm {

SmoothnessSpec::SmoothnessSpec(double beta_, int j_)
  : beta(beta_)
  , j(j_)
{
  if (j < 0 || !(beta > 2.0 * j) || beta > 2.0 * j + 2.0)
    throw ParameterError("smoothness needs 2j < beta <= 2j + 2");
}

SmoothnessSpec SmoothnessSpec::from_beta(double beta)
{
  if (!(beta > 0.0))
    throw ParameterError("beta must be positive");
  return SmoothnessSpec(beta, static_cast<int>(std::ceil(beta / 2.0)) - 1);
}

namespace {

void check_depth(int j)
{
  if (j < 0)
    throw ParameterError("recursion depth j must be non-negative");
}

Convolution convolve_checked(const Grid& grid, std::span<const double> f, double sigma)
{
  auto conv = convolve_values(grid, f, sigma);
  if (std::abs(conv.mass_loss) >= kMaxConvolutionMassLoss)
    throw CoverageError("higher-order kernel convolution loses mass through the grid edges",
                        conv.mass_loss);
  return conv;
}

FBeta finish(const Grid& grid, std::vector<double> values, const FBetaOptions& opts)
{
  const double h = grid.step();
  std::vector<double> neg(values.size());
  std::vector<double> floored(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    neg[i] = std::max(-values[i], 0.0);
    floored[i] = std::max(values[i], 0.0);
  }
  double negative_mass = trapezoid(neg, h);
  if (negative_mass > opts.max_negative_mass)
    throw SigmaTooLargeError("f_beta is too negative; reduce sigma", negative_mass);
  double integral = trapezoid(values, h);
  return FBeta{ GridDensity(grid, std::move(floored)), std::move(values), negative_mass, integral };
}

} // namespace

std::vector<double> fbeta_coefficients(int j)
{
  check_depth(j);
  std::vector<double> c(static_cast<std::size_t>(j + 1));
  // C(j+1, i+1) built incrementally.
  double binom = static_cast<double>(j + 1);
  for (int i = 0; i <= j; ++i) {
    c[static_cast<std::size_t>(i)] = (i % 2 == 0 ? 1.0 : -1.0) * binom;
    binom = binom * static_cast<double>(j + 1 - (i + 1)) / static_cast<double>(i + 2);
  }
  return c;
}

FBeta fbeta_iterative(const GridDensity& f0, double sigma, int j, const FBetaOptions& opts)
{
  check_depth(j);
  check_bandwidth(f0.grid(), sigma);
  const auto base = f0.values();
  std::vector<double> f(base.begin(), base.end());
  for (int step = 0; step < j; ++step) {
    auto conv = convolve_checked(f0.grid(), f, sigma);
    for (std::size_t i = 0; i < f.size(); ++i)
      f[i] = base[i] + f[i] - conv.values[i];
  }
  return finish(f0.grid(), std::move(f), opts);
}

FBeta fbeta_closed_form(const GridDensity& f0, double sigma, int j, const FBetaOptions& opts)
{
  check_depth(j);
  check_bandwidth(f0.grid(), sigma);
  const auto coef = fbeta_coefficients(j);
  const auto base = f0.values();
  std::vector<double> f(base.size());
  for (std::size_t i = 0; i < f.size(); ++i)
    f[i] = coef[0] * base[i];
  for (int k = 1; k <= j; ++k) {
    auto conv = convolve_checked(f0.grid(), base, sigma * std::sqrt(static_cast<double>(k)));
    for (std::size_t i = 0; i < f.size(); ++i)
      f[i] += coef[static_cast<std::size_t>(k)] * conv.values[i];
  }
  return finish(f0.grid(), std::move(f), opts);
}

std::pair<double, double> approx_order_window(int j)
{
  if (j == 0)
    return { 1.7, 2.3 };
  if (j == 1)
    return { 3.5, 4.5 };
  double beta = 2.0 * j + 2.0;
  return { 0.85 * beta, 1.15 * beta };
}

std::pair<double, double> kl_rate_window(int j)
{
  if (j == 0)
    return { 3.4, 4.6 };
  if (j == 1)
    return { 6.5, 9.5 };
  double two_beta = 4.0 * j + 4.0;
  return { 0.85 * two_beta, 1.15 * two_beta };
}

std::vector<double> geometric_sigmas(double from, double to, std::size_t count)
{
  if (count < 2 || !(from > 0.0) || !(to > 0.0))
    throw ParameterError("geometric_sigmas needs positive ends and at least 2 values");
  std::vector<double> s(count);
  for (std::size_t k = 0; k < count; ++k)
    s[k] = from * std::pow(to / from, static_cast<double>(k) / static_cast<double>(count - 1));
  s.back() = to;
  return s;
}

namespace {

void check_sigmas(const std::vector<double>& sigmas)
{
  if (sigmas.size() < 5)
    throw ParameterError("rate experiments need at least 5 sigma values");
  for (std::size_t i = 1; i < sigmas.size(); ++i)
    if (!(sigmas[i] < sigmas[i - 1]))
      throw ParameterError("sigma values must be strictly decreasing");
  if (!(sigmas.back() > 0.0) || sigmas.front() / sigmas.back() < 10.0 * (1.0 - 1e-12))
    throw ParameterError("sigma values must span at least one decade");
}

struct PerSigma
{
  double error = 0.0;
  double negative_mass = 0.0;
};

template<class Metric>
std::vector<PerSigma> run_per_sigma(const GridDensity& f0,
                                    int j,
                                    const std::vector<double>& sigmas,
                                    const FBetaOptions& opts,
                                    Metric&& metric)
{
  std::vector<PerSigma> out(sigmas.size());
  parallel_for(sigmas.size(), [&](std::size_t k) {
    auto fb = fbeta_iterative(f0, sigmas[k], j, opts);
    auto smoothed = convolve_gaussian(fb.density, sigmas[k]);
    out[k] = { metric(smoothed), fb.negative_mass };
  });
  return out;
}

SlopeReport make_report(int j,
                        const std::vector<double>& sigmas,
                        const std::vector<PerSigma>& rows,
                        double target,
                        std::pair<double, double> window,
                        double min_r2,
                        const char* error_column)
{
  SlopeReport rep;
  rep.xs = sigmas;
  for (const auto& r : rows)
    rep.ys.push_back(r.error);
  rep.target = target;

  std::size_t bad_pairs = 0;
  for (std::size_t i = 1; i < rep.ys.size(); ++i)
    if (rep.ys[i] > rep.ys[i - 1])
      ++bad_pairs;
  rep.invalid = static_cast<double>(bad_pairs) > 0.1 * static_cast<double>(rep.ys.size() - 1);

  auto fit = slope_fit(rep.xs, rep.ys);
  rep.slope = fit.slope;
  rep.r2 = fit.r2;
  rep.pass = !rep.invalid && fit.slope >= window.first && fit.slope <= window.second &&
             fit.r2 >= min_r2;

  double max_neg = 0.0;
  for (const auto& r : rows)
    max_neg = std::max(max_neg, r.negative_mass);
  rep.metrics = { { "j", static_cast<double>(j) },
                  { "slope_lo", window.first },
                  { "slope_hi", window.second },
                  { "min_r2", min_r2 },
                  { "non_monotone_pairs", static_cast<double>(bad_pairs) },
                  { "max_negative_mass", max_neg } };
  rep.table.columns = { "sigma", error_column, "negative_mass" };
  for (std::size_t i = 0; i < sigmas.size(); ++i)
    rep.table.rows.push_back({ sigmas[i], rows[i].error, rows[i].negative_mass });
  return rep;
}

} // namespace

SlopeReport approx_order_experiment(const GridDensity& f0,
                                    int j,
                                    const std::vector<double>& sigmas,
                                    const FBetaOptions& opts)
{
  check_depth(j);
  check_sigmas(sigmas);
  auto rows = run_per_sigma(f0, j, sigmas, opts, [&](const GridDensity& g) {
    double e = 0.0;
    for (std::size_t i = 0; i < f0.size(); ++i)
      if (f0[i] >= kInteriorFloor)
        e = std::max(e, std::abs(g[i] - f0[i]));
    return e;
  });
  return make_report(j, sigmas, rows, 2.0 * j + 2.0, approx_order_window(j), 0.98, "sup_error");
}

SlopeReport kl_rate_experiment(const GridDensity& f0,
                               int j,
                               const std::vector<double>& sigmas,
                               const FBetaOptions& opts)
{
  check_depth(j);
  check_sigmas(sigmas);
  auto rows = run_per_sigma(f0, j, sigmas, opts, [&](const GridDensity& g) {
    double kl = divergence(DivergenceKind::kl(), f0, g);
    if (kl < -1e-10) {
      std::ostringstream os;
      os << "negative KL " << kl << " in rate experiment";
      throw NumericError(os.str());
    }
    return std::max(kl, 1e-300);
  });
  return make_report(j, sigmas, rows, 4.0 * j + 4.0, kl_rate_window(j), 0.95, "kl");
}

} // namespace nllvm
