#pragma once

#include "nllvm/grid_density.hpp"
#include "nllvm/rng.hpp"
#include "nllvm/transfer_map.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace nllvm {

//! Distribution of the rescaling factor A.
struct RescaleDist
{
  enum class Kind
  {
    Fixed,
    Gamma
  };

  Kind kind = Kind::Fixed;
  double value = 1.0; //!< A when fixed
  double shape = 2.0; //!< Gamma shape when random
  double rate = 1.0;  //!< Gamma rate when random

  static RescaleDist fixed(double a) { return { Kind::Fixed, a, 2.0, 1.0 }; }
  static RescaleDist gamma(double shape, double rate) { return { Kind::Gamma, 1.0, shape, rate }; }
};

struct GPPriorConfig
{
  double variance = 1.0;
  RescaleDist rescale = RescaleDist::fixed(1.0);
  double a_sigma = 3.0;
  double b_sigma = 1.0;
  //! Diagonal boost for the Cholesky factor, at most 1e-6 * variance.
  double jitter = 1e-8;

  //! Throws ParameterError on non-positive parameters or oversized jitter.
  void validate() const;
};

struct GPDraw
{
  std::vector<double> knots;
  std::vector<double> values;
  double rescale_used = 1.0;
  std::uint64_t seed = 0;

  TransferFunction transfer() const { return TransferFunction(knots, values); }
};

inline constexpr std::size_t kMinPathKnots = 16;
inline constexpr std::size_t kMaxPathKnots = 1024;
inline constexpr int kJitterDoublings = 3;

//! variance * exp(-A^2 (x - x')^2) on the given points.
Eigen::MatrixXd se_kernel(const std::vector<double>& xs, double variance, double rescale);
Eigen::MatrixXd se_kernel(const std::vector<double>& xs,
                          const std::vector<double>& ys,
                          double variance,
                          double rescale);

/// Lower Cholesky factor of m + jitter I. The jitter is doubled up to three
/// times on failure; after that a ConditioningError is thrown.
Eigen::MatrixXd jittered_cholesky(const Eigen::MatrixXd& m, double jitter);

//! n uniform knots on [0, 1].
std::vector<double> uniform_knots(std::size_t n);

//! Draws GP paths on a fixed knot grid, reusing one factorisation.
class GPPathSampler
{
public:
  GPPathSampler(const GPPriorConfig& cfg, double rescale, std::size_t n_knots);

  GPDraw draw(Rng& rng) const;
  const Eigen::MatrixXd& cholesky() const noexcept { return chol_; }
  const std::vector<double>& knots() const noexcept { return knots_; }
  double rescale() const noexcept { return rescale_; }

private:
  std::vector<double> knots_;
  double rescale_;
  Eigen::MatrixXd chol_;
};

double sample_rescale(const GPPriorConfig& cfg, Rng& rng);

//! One path with n_knots in [16, 1024]; deterministic given the stream.
GPDraw sample_path(const GPPriorConfig& cfg, double rescale, std::size_t n_knots, Rng& rng);

//! Inverse-gamma draw with density proportional to s^-(a+1) exp(-b / s).
double sample_sigma(const GPPriorConfig& cfg, Rng& rng);

//! Log density of IG(a, b) at s.
double inverse_gamma_logpdf(double s, double a, double b);

/// One density from the induced prior: rescale, path, sigma, then
/// mixture_density on `grid`.
GridDensity prior_draw_density(const GPPriorConfig& cfg,
                               const Grid& grid,
                               Rng& rng,
                               std::size_t n_knots = 64);

struct SupportProbe
{
  double delta = 0.0;
  double rescale = 0.0;
  std::size_t draws = 0;
  //! Fraction of unconditional prior draws within delta of the target.
  double mc_fraction = 0.0;
  //! Sup distance between the target and the GP interpolant through it.
  double interpolant_error = 0.0;
  //! Log prior density of the target values at the conditioning knots.
  double log_density_at_knots = 0.0;
  //! Fraction of conditional draws within delta of the target.
  double conditional_fraction = 0.0;
  //! True when the conditional construction exhibits a delta-ball of
  //! positive prior mass.
  bool positive = false;
};

/// Sup-norm support probe around `target` with A = 1 / delta. Reports the
/// raw Monte Carlo hit rate and an exact construction: condition the GP on
/// the target at `n_condition` uniform knots and check that the interpolant
/// and its conditional draws stay within delta.
SupportProbe support_probe(const GPPriorConfig& cfg,
                           const TransferFunction& target,
                           double delta,
                           std::size_t draws,
                           Rng& rng,
                           std::size_t n_knots = 128,
                           std::size_t n_condition = 64);

} // namespace nllvm
