#pragma once

#include "nllvm/grid_density.hpp"
#include "nllvm/slope_fit.hpp"

#include <vector>

namespace nllvm {

//! Hoelder smoothness beta with its recursion depth j, 2j < beta <= 2j + 2.
struct SmoothnessSpec
{
  double beta = 2.0;
  int j = 0;

  SmoothnessSpec(double beta_, int j_);
  static SmoothnessSpec from_beta(double beta);
};

struct FBetaOptions
{
  //! Largest tolerated pre-floor negative mass before SigmaTooLargeError.
  double max_negative_mass = 1e-3;
};

struct FBeta
{
  //! Floored at zero and renormalised.
  GridDensity density;
  //! Values before flooring.
  std::vector<double> signed_values;
  //! Trapezoid integral of the negative part of signed_values.
  double negative_mass = 0.0;
  //! Trapezoid integral of signed_values.
  double signed_integral = 0.0;
};

/// j steps of f_{k+1} = f0 - (phi_sigma * f_k - f_k) from f_0 = f0, using
/// un-normalised convolutions.
FBeta fbeta_iterative(const GridDensity& f0, double sigma, int j, const FBetaOptions& opts = {});

/// sum_{i=0..j} (-1)^i C(j+1, i+1) phi_{sigma sqrt(i)} * f0.
FBeta fbeta_closed_form(const GridDensity& f0, double sigma, int j, const FBetaOptions& opts = {});

//! Coefficients (-1)^i C(j+1, i+1), i = 0..j.
std::vector<double> fbeta_coefficients(int j);

//! Accepted slope window for sup error at depth j.
std::pair<double, double> approx_order_window(int j);
//! Accepted slope window for KL at depth j.
std::pair<double, double> kl_rate_window(int j);

inline constexpr double kInteriorFloor = 1e-3;

/// e(sigma) = sup over {f0 >= 1e-3} of |phi_sigma * f_beta - f0| for every
/// sigma, with a log-log slope fit. f_beta is built with `opts` (callers may
/// relax the negative-mass limit; the masses are reported in the table).
/// Pass requires the slope inside approx_order_window(j), r2 >= 0.98 and at
/// most 10% of successive pairs non-monotone.
SlopeReport approx_order_experiment(const GridDensity& f0,
                                    int j,
                                    const std::vector<double>& sigmas,
                                    const FBetaOptions& opts = {});

/// KL(f0 || phi_sigma * f_beta) per sigma with a log-log slope fit. Pass
/// requires the slope inside kl_rate_window(j) and r2 >= 0.95.
SlopeReport kl_rate_experiment(const GridDensity& f0,
                               int j,
                               const std::vector<double>& sigmas,
                               const FBetaOptions& opts = {});

//! count geometrically spaced values from `from` to `to` inclusive.
std::vector<double> geometric_sigmas(double from, double to, std::size_t count);

} // namespace nllvm
