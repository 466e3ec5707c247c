#pragma once

#include "nllvm/gp_prior.hpp"
#include "nllvm/grid_density.hpp"
#include "nllvm/rng.hpp"
#include "nllvm/slope_fit.hpp"
#include "nllvm/transfer_map.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nllvm {

//! One state of the latent-variable sampler. mu_values live on uniform
//! knots of [0, 1].
struct NLLVMState
{
  std::vector<double> mu_values;
  double sigma = 1.0;
  std::vector<double> eta;
  double log_post = 0.0;

  TransferFunction transfer() const { return TransferFunction::on_uniform_knots(mu_values); }
};

//! Metropolis proposal state for the log-sigma random walk.
struct SigmaProposal
{
  double step = 0.1;
  std::size_t proposed = 0;
  std::size_t accepted = 0;

  double rate() const { return proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0; }
};

inline constexpr std::size_t kLatentGrid = 512;
inline constexpr double kLatentWindow = 8.0;
inline constexpr double kDefaultRescaleMcmc = 20.0;

/// Redraws every eta_i from its full conditional, proportional to
/// phi_sigma(y_i - mu(eta)) on [0, 1], by inverse-CDF sampling over 512
/// cells (uniform within the chosen cell). A datum farther than 8 sigma
/// from every cell value falls back to a uniform draw and a warning.
/// Returns the number of fallbacks.
std::size_t update_latents(NLLVMState& state, const std::vector<double>& data, Rng& rng);

/// Conjugate GP-regression draw of the knot values given (eta_i, y_i) and
/// noise sigma. With m = L z, L the jittered Cholesky factor of the prior
/// covariance, z | rest ~ N(P^-1 L^T B^T y / sigma^2, P^-1) where
/// P = I + L^T B^T B L / sigma^2 and B holds the interpolation weights.
void update_transfer(NLLVMState& state,
                     const std::vector<double>& data,
                     const GPPriorConfig& cfg,
                     Rng& rng);

/// `steps` random-walk Metropolis moves on log sigma targeting
/// IG(a, b) x prod phi_sigma(y_i - mu(eta_i)).
void update_sigma(NLLVMState& state,
                  const std::vector<double>& data,
                  const GPPriorConfig& cfg,
                  Rng& rng,
                  SigmaProposal& proposal,
                  int steps = 1);

//! Posterior mean of the knot values for fixed latents and sigma.
std::vector<double> transfer_posterior_mean(const std::vector<double>& eta,
                                            const std::vector<double>& data,
                                            double sigma,
                                            const GPPriorConfig& cfg,
                                            std::size_t n_knots);

//! Unnormalised joint log posterior of a state.
double log_posterior(const NLLVMState& state, const std::vector<double>& data, const GPPriorConfig& cfg);

struct MCMCOptions
{
  std::size_t iters = 4000;
  std::size_t burn_in = 1000;
  std::size_t thin = 10;
  std::uint64_t seed = 0;
  std::size_t n_knots = 64;
  int sigma_steps = 5;
  //! Starting state; when absent the chain starts from the empirical
  //! quantile function with rank-based latents.
  std::optional<NLLVMState> init;
};

struct PosteriorSamples
{
  std::vector<NLLVMState> states;
  std::map<std::string, double> acceptance;
  MCMCOptions options;
  GPPriorConfig config;
  std::uint64_t seed = 0;
  std::vector<double> log_post_trace;
  double sigma_step = 0.0;
  std::size_t latent_fallbacks = 0;
};

//! Prior defaults for the density sampler: A fixed at 20, unit variance.
GPPriorConfig default_mcmc_config();

//! Empirical-quantile starting state.
NLLVMState initial_state(const std::vector<double>& data, std::size_t n_knots);

/// Cycles latents, transfer, sigma. Needs at least 10 observations,
/// iters > burn_in, thin >= 1 and a fixed rescale. Keeps states with
/// t >= burn_in and (t - burn_in) % thin == 0.
PosteriorSamples fit_mcmc(const std::vector<double>& data, const GPPriorConfig& cfg, const MCMCOptions& opts);

//! Average of mixture_density over the kept states.
GridDensity predictive_density(const PosteriorSamples& samples, const Grid& grid);

//! `base` padded by whole steps so every kept component fits to 9 sigma.
Grid predictive_grid(const PosteriorSamples& samples, const Grid& base);

//! Log-factor exponent t = beta max(2, q) / (2 beta + 1) + 1.
double rate_log_exponent(double beta, double q);

//! n^(-beta / (2 beta + 1)) (log n)^t.
double target_rate(double n, double beta, double q);

struct ContractionOptions
{
  std::vector<std::size_t> n_list{ 100, 400, 1600 };
  std::size_t reps = 5;
  double beta = 2.0;
  double q = 0.0;
  MCMCOptions mcmc;
  std::uint64_t seed = 0;
};

/// Fits the sampler to `reps` samples of each size drawn from f0 and
/// records the Hellinger distance h = sqrt(HellingerSq) between the
/// predictive density (on f0's grid) and f0. Reports per-n medians, their
/// log-log slope and the target rate; pass means strictly decreasing
/// medians. Fewer than 3 sizes flag insufficient points and skip the fit.
SlopeReport contraction_experiment(const GridDensity& f0, const GPPriorConfig& cfg, const ContractionOptions& opts);

} // namespace nllvm
