#pragma once

#include "nllvm/gpivi.hpp"
#include "nllvm/grid_density.hpp"
#include "nllvm/slope_fit.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace nllvm {

// Every experiment here is a deterministic function of its arguments and
// seed. Replicate i draws from Rng::for_task(seed, <check name>, i), so the
// result does not depend on the worker count.

//! 1 - sqrt(2 s1 s2 / (s1^2 + s2^2)) exp(-d^2 / (4 (s1^2 + s2^2))).
double hellinger_mixture_bound(double s1, double s2, double sup_dist);

inline constexpr double kHellingerSlack = 1e-6;

struct HellingerBoundOptions
{
  std::size_t trials = 200;
  std::uint64_t seed = 0;
  double rescale = 5.0;
  std::size_t n_knots = 64;
  double sigma_lo = 0.05;
  double sigma_hi = 0.5;
  Grid grid = Grid(-8.0, 8.0, 4096);
};

/// Random pairs of GP transfer maps and bandwidths; each trial records
/// margin = HellingerSq - bound - 1e-6. Needs at least 100 trials.
CheckReport check_hellinger_bound(const HellingerBoundOptions& opts);
CheckReport check_hellinger_bound(std::size_t trials, std::uint64_t seed);

inline constexpr double kLogSupSlack = 0.5;

/// mu = mu0 + delta g / |g|_inf with g a GP path (A = 5) and mu0 the quantile
/// map of f0. The margin of a trial is
///   SupLogRatio(f0, f_{mu,sigma}) - delta^2 / sigma^2 - C - 0.5,
/// with C the delta = 0 value. Trial t uses the same path for every delta.
CheckReport check_logsup_bound(const GridDensity& f0,
                               double sigma,
                               const std::vector<double>& deltas,
                               std::size_t trials,
                               std::uint64_t seed);

//! P(chi^2_1 <= x).
double chi2_1_cdf(double x);

//! Kolmogorov-Smirnov distance between a sample and a continuous CDF.
double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf);

struct Chi2Params
{
  double sigma = 1.0;
  double theta_star = 1.0;
  double mu0 = 0.0;
  double s0 = 1.0;
};

inline constexpr double kChi2MaxKS = 0.05;
inline constexpr double kChi2MeanLo = 0.85;
inline constexpr double kChi2MeanHi = 1.15;

/// KL[N(theta*, sigma^2/n) || N(mu_n, sigma_n^2)] per replicate for the
/// normal-normal model, compared with chi^2_1 (KS <= 0.05, mean in
/// [0.85, 1.15]). Metrics also report 2 KL against chi^2_1 (ks_scaled,
/// mean_scaled). Needs reps >= 500 and n >= 100.
CheckReport chi2_limit_experiment(std::size_t n, std::size_t reps, const Chi2Params& params, std::uint64_t seed);

inline constexpr double kSupportClip = 1e-4;

/// mu = quantile of f0 clipped at 1e-4, then sigma decreasing from a tenth
/// of the grid width; stops at the first sigma with |f_{mu,sigma} - f0|_1 <
/// eps. Reports the sigma, the L1 error and delta = eps sigma / 4.
CheckReport l1_support_search(const GridDensity& f0, double eps);

struct RiskBoundOptions
{
  std::vector<std::size_t> n_list{ 50, 200, 800 };
  std::vector<double> alphas{ 0.5, 0.99 };
  std::size_t reps = 20;
  //! eps(n); defaults to 2 / sqrt(n).
  std::function<double(std::size_t)> eps_rule;
  double D = 2.0;
  std::size_t knots = 16;
  std::size_t max_failures = 1;
  double witness_factor = 1.1;
  std::uint64_t seed = 0;
};

/// Per (n, alpha, replicate): fit q with the optimizer and compare the
/// Renyi risk with bound + remainder; at most max_failures per (n, alpha).
/// Per n also builds the truncated f_beta witness from the prior and checks
/// D(q_witness || prior) <= 1.1 log(1 / ball mass). Needs a model with an
/// exact fractional posterior.
CheckReport risk_bound_experiment(const BayesModel& model, const RiskBoundOptions& opts);

struct VBBoundedOptions
{
  std::vector<std::size_t> n_list{ 100, 1000, 10000 };
  std::size_t reps = 200;
  double c0 = 2.0;
  double factor = 1.5;
  std::uint64_t seed = 0;
};

/// Normal-normal model with theta* = 0: the 95th percentile of the minimal
/// KL over Q_n (sigma_n = 1/sqrt(2n), M = 4/sqrt(n)) must stay within
/// `factor` times its value at the first n.
CheckReport vb_kl_bounded(const VBBoundedOptions& opts);

struct RiskDecayOptions
{
  std::vector<std::size_t> n_list{ 50, 200, 800, 3200 };
  std::size_t reps = 20;
  double alpha = 0.99;
  std::size_t knots = 16;
  double max_slope = -0.8;
  std::uint64_t seed = 0;
};

/// Mean over replicates of int h^2 q_hat against n on a log-log scale;
/// passes when the slope is at most max_slope.
SlopeReport hellinger_risk_decay(const BayesModel& model, const RiskDecayOptions& opts);

inline constexpr double kClosedFormTolerance = 1e-8;

//! Sup distance between the closed-form and iterated f_beta for j = 0..3.
CheckReport fbeta_closed_form_check(std::size_t densities, std::uint64_t seed);

inline constexpr double kMixtureIdentityTolerance = 2e-3;

//! Sup distance between mixture_density(quantile_of(f0), s) and phi_s * f0.
CheckReport mixture_identity_check(std::size_t densities,
                                   const std::vector<double>& sigmas,
                                   std::uint64_t seed);

} // namespace nllvm
