#pragma once

#include "nllvm/grid_density.hpp"
#include "nllvm/rng.hpp"
#include "nllvm/transfer_map.hpp"

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace nllvm {

/// Scalar-parameter Bayesian model with IID data. Per-datum divergences are
/// between p(. | theta*) (or the first argument) and p(. | theta), taken
/// over the data distribution.
class BayesModel
{
public:
  BayesModel(Grid grid, double theta_star)
    : grid_(grid)
    , theta_star_(theta_star)
  {
  }
  virtual ~BayesModel() = default;

  virtual std::string name() const = 0;
  virtual double log_likelihood(double theta, double datum) const = 0;
  //! Normalised log prior density; -inf outside the support.
  virtual double log_prior(double theta) const = 0;
  virtual bool iid() const { return true; }

  //! D(p_a || p_b) for one datum.
  virtual double kl1(double a, double b) const = 0;
  //! Second moment of log(p_a / p_b) under p_a for one datum.
  virtual double v1(double a, double b) const = 0;
  //! Renyi divergence D_alpha(p_a || p_b) for one datum.
  virtual double renyi1(double a, double b, double alpha) const = 0;
  //! Squared Hellinger distance 1 - affinity between p_a and p_b.
  virtual double hellinger1(double a, double b) const = 0;

  virtual std::vector<double> simulate(std::size_t n, Rng& rng) const = 0;

  //! Alpha-fractional posterior on `grid` when known in closed form.
  virtual std::optional<GridDensity> exact_posterior(const std::vector<double>& data,
                                                     double alpha,
                                                     const Grid& grid) const;

  double theta_star() const noexcept { return theta_star_; }
  void set_theta_star(double t) noexcept { theta_star_ = t; }
  const Grid& grid() const noexcept { return grid_; }
  GridDensity prior_density() const { return prior_density(grid_); }
  GridDensity prior_density(const Grid& g) const;

private:
  Grid grid_;
  double theta_star_;
};

//! y ~ N(theta, sigma^2) with a flat prior on [lo, hi].
class NormalMeanModel : public BayesModel
{
public:
  NormalMeanModel(double sigma, double theta_star, double lo = -1.0, double hi = 1.0, std::size_t grid_n = 4096);

  std::string name() const override { return "normal-mean"; }
  double log_likelihood(double theta, double y) const override;
  double log_prior(double theta) const override;
  double kl1(double a, double b) const override;
  double v1(double a, double b) const override;
  double renyi1(double a, double b, double alpha) const override;
  double hellinger1(double a, double b) const override;
  std::vector<double> simulate(std::size_t n, Rng& rng) const override;
  std::optional<GridDensity> exact_posterior(const std::vector<double>& data,
                                             double alpha,
                                             const Grid& grid) const override;

  double sigma() const noexcept { return sigma_; }
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }

protected:
  double sigma_;
  double lo_;
  double hi_;
};

//! y ~ N(theta, sigma^2), theta ~ N(mu0, s0^2).
class NormalNormalModel : public NormalMeanModel
{
public:
  NormalNormalModel(double sigma, double theta_star, double mu0 = 0.0, double s0 = 1.0, std::size_t grid_n = 4096);

  std::string name() const override { return "normal-normal"; }
  double log_prior(double theta) const override;
  std::optional<GridDensity> exact_posterior(const std::vector<double>& data,
                                             double alpha,
                                             const Grid& grid) const override;

  struct Moments
  {
    double mean;
    double var;
  };
  //! Mean and variance of the alpha-fractional posterior.
  Moments posterior_moments(const std::vector<double>& data, double alpha) const;

  double mu0() const noexcept { return mu0_; }
  double s0() const noexcept { return s0_; }

private:
  double mu0_;
  double s0_;
};

/// Logistic regression through the origin with x ~ N(0, 1). A datum is the
/// signed covariate d = (2y - 1) x, so log p(d | theta) = log sigmoid(theta d)
/// up to the covariate density. Prior N(0, s0^2).
class Logistic1DModel : public BayesModel
{
public:
  Logistic1DModel(double theta_star, double s0 = 2.0, std::size_t grid_n = 4096);

  std::string name() const override { return "logistic-1d"; }
  double log_likelihood(double theta, double d) const override;
  double log_prior(double theta) const override;
  double kl1(double a, double b) const override;
  double v1(double a, double b) const override;
  double renyi1(double a, double b, double alpha) const override;
  double hellinger1(double a, double b) const override;
  std::vector<double> simulate(std::size_t n, Rng& rng) const override;

private:
  double s0_;
  std::vector<double> xs_;
  std::vector<double> wx_;
};

//! Posterior proportional to prior x likelihood^alpha, by quadrature on `grid`.
GridDensity quadrature_posterior(const BayesModel& model,
                                 const std::vector<double>& data,
                                 double alpha,
                                 const Grid& grid);

/// Grid of `n` points centred on the alpha-fractional posterior mode with
/// half-width `width` posterior standard deviations (found by quadrature on
/// the model grid), clipped to the model grid.
Grid posterior_grid(const BayesModel& model,
                    const std::vector<double>& data,
                    double alpha,
                    std::size_t n = 512,
                    double width = 12.0);

struct VariationalParams
{
  TransferFunction mu = TransferFunction::constant(0.0);
  double log_sigma = 0.0;

  double sigma() const { return std::exp(log_sigma); }
};

//! Quantile map of N(m, tau^2) on cosine-spaced levels, tails clipped at 1e-6.
TransferFunction normal_quantile_map(double m, double tau, std::size_t n_knots);

//! q(theta) = int_0^1 phi_sigma(theta - mu(eta)) d eta on `grid`.
GridDensity q_density(const VariationalParams& params, const Grid& grid);

struct KLBallSpec
{
  double theta_star = 0.0;
  double eps = 0.1;
  std::size_t n = 1;
};

//! n KL_1 <= n eps^2 and n V_1 <= n eps^2; UnsupportedError for non-IID models.
bool kl_ball_contains(const KLBallSpec& spec, const BayesModel& model, double theta);

inline constexpr double kMaxOutsideSupportMass = 1e-8;

/// Practical alpha-VB objective, tabulated once per (model, data, alpha,
/// grid): alpha E_q[-sum log p(y_i | theta)] + D(q || prior). The prior KL
/// uses the analytic log prior, so it is not affected by the window.
class VBObjective
{
public:
  VBObjective(const BayesModel& model, const std::vector<double>& data, double alpha, const Grid& grid);

  double operator()(const VariationalParams& params) const;
  double operator()(const GridDensity& q, double lost_mass = 0.0) const;

  //! E_q[-sum_i log p(y_i | theta)].
  double neg_log_lik(const GridDensity& q) const;
  //! E_q[sum_i log p(y_i | theta*) - log p(y_i | theta)].
  double model_fit(const GridDensity& q) const;
  //! D(q || prior); SupportError when q puts more than 1e-8 outside the prior support.
  double prior_kl(const GridDensity& q, double lost_mass = 0.0) const;

  double alpha() const noexcept { return alpha_; }
  const Grid& grid() const noexcept { return grid_; }

private:
  const BayesModel& model_;
  double alpha_;
  Grid grid_;
  std::vector<double> loglik_;
  std::vector<double> logprior_;
  double loglik_star_ = 0.0;
};

double practical_objective(const VariationalParams& params,
                           const BayesModel& model,
                           const std::vector<double>& data,
                           double alpha,
                           const Grid& grid);

struct PsiDiagnostic
{
  double model_fit = 0.0;
  double prior_kl = 0.0;
  double alpha = 1.0;
  //! model_fit + prior_kl / alpha.
  double psi = 0.0;
};

PsiDiagnostic psi_diagnostic(const VariationalParams& params,
                             const BayesModel& model,
                             const std::vector<double>& data,
                             double alpha,
                             const Grid& grid);

struct OptimizeOptions
{
  std::size_t iters = 200;
  std::uint64_t seed = 0;
  std::optional<VariationalParams> init;
  double tolerance = 1e-8;
};

struct OptimizeResult
{
  VariationalParams params;
  double objective = 0.0;
  double initial_objective = 0.0;
  std::size_t sweeps = 0;
  bool converged = false;
  bool stalled = false;
  std::vector<double> trace;
};

inline constexpr std::size_t kMinVIKnots = 8;
inline constexpr std::size_t kMaxVIKnots = 256;

/// Coordinate descent on (knot values, log sigma). Each coordinate takes a
/// Newton step from central differences (step 1e-4 relative) with halving
/// backtracking (at most 30); knot values are sorted after every sweep.
/// Stops when the relative change of a sweep drops below the tolerance.
/// Without an init the start is a Laplace fit of the fractional posterior
/// with knot values jittered by the seed.
OptimizeResult optimize(const BayesModel& model,
                        const std::vector<double>& data,
                        double alpha,
                        std::size_t knots,
                        const Grid& grid,
                        const OptimizeOptions& opt = {});

struct RestrictedFamilySpec
{
  double M = 1.0;
  double sigma_n = 0.1;
  double c0 = 2.0;
};

inline constexpr std::size_t kFamilyMeans = 41;
inline constexpr std::size_t kFamilyScales = 9;

/// The members of Q_n on `grid`: quantile maps of N(m, tau^2) for 41 means in
/// [-M, M] and 9 tau in [sigma_n, sqrt(c0) sigma_n], each with bandwidth sigma_n.
class RestrictedFamily
{
public:
  RestrictedFamily(const RestrictedFamilySpec& spec, const Grid& grid, std::size_t knots = 128);

  //! min over members of D(q || target).
  double min_kl(const GridDensity& target) const;
  const std::vector<GridDensity>& members() const noexcept { return members_; }

private:
  std::vector<GridDensity> members_;
};

//! m_n* over the restricted family; UnsupportedError without an exact posterior.
double restricted_min_kl(const RestrictedFamilySpec& spec,
                         const BayesModel& model,
                         const std::vector<double>& data,
                         const Grid& grid);

//! int D_alpha(p_theta || p_theta*) q(theta) d theta.
double risk_integral(const VariationalParams& params, const BayesModel& model, double alpha, const Grid& grid);
double risk_integral(const GridDensity& q, const BayesModel& model, double alpha);

//! int h^2(p_theta, p_theta*) q(theta) d theta.
double hellinger_risk(const GridDensity& q, const BayesModel& model);

struct BallMass
{
  double lo = 0.0;
  double hi = 0.0;
  double mass = 0.0;
};

//! Prior mass of the KL ball; ResolutionError when no grid point lies in it.
BallMass ball_mass(const KLBallSpec& spec, const BayesModel& model);

struct RiskBound
{
  double bound = 0.0;      //!< D alpha / (1 - alpha) eps^2 + complexity
  double complexity = 0.0; //!< log(1 / ball mass) / (n (1 - alpha))
  double remainder = 0.0;  //!< log((D - 1)^2 n eps^2) / (n (1 - alpha))
  double ball_mass = 0.0;
  double log_inv_mass = 0.0;
  //! log(1 / ball mass) <= n eps^2.
  bool a1_holds = false;
  //! The printed form log(1 / ball mass) <= -n eps^2.
  bool a1_printed_holds = false;
};

RiskBound risk_bound_rhs(const BayesModel& model, std::size_t n, double alpha, double eps, double D_const = 2.0);

} // namespace nllvm
