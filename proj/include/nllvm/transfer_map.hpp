#pragma once

#include "nllvm/grid_density.hpp"

#include <cstddef>
#include <functional>
#include <vector>

namespace nllvm {

//! Piecewise-linear map mu: [0, 1] -> R.
class TransferFunction
{
public:
  //! knots strictly increasing from 0 to 1, values finite, same length >= 2.
  TransferFunction(std::vector<double> knots, std::vector<double> values);

  //! Values at n uniform knots k / (n - 1).
  static TransferFunction on_uniform_knots(std::vector<double> values);
  static TransferFunction from_function(std::size_t n_knots,
                                        const std::function<double(double)>& f);
  static TransferFunction constant(double c);

  double operator()(double x) const;

  const std::vector<double>& knots() const noexcept { return knots_; }
  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return knots_.size(); }
  bool uniform_knots() const noexcept { return uniform_; }

  double min_value() const;
  double max_value() const;

private:
  std::vector<double> knots_;
  std::vector<double> values_;
  bool uniform_ = false;
};

//! Exact sup |a - b| over [0, 1] (attained at a knot of either map).
double sup_distance(const TransferFunction& a, const TransferFunction& b);

//! Histogram of the push-forward of Lebesgue measure on [0, 1].
struct MixingHistogram
{
  std::vector<double> bin_edges;
  std::vector<double> masses;
};

inline constexpr std::size_t kMinQuantileKnots = 16;

/// Quantile function of f on n_knots levels t_k = (1 - cos(pi k / (n - 1))) / 2,
/// clipped to [clip, 1 - clip]. The cosine spacing puts short segments in
/// the tails, where a long linear piece would smear the tail mass. Uses the left-continuous inverse of the
/// cumulative trapezoid sums with linear interpolation inside a cell; level
/// 0 maps to the left end of the support and level 1 to the right end.
/// Interior zero-density stretches trigger a flat-region warning.
TransferFunction quantile_of(const GridDensity& f, std::size_t n_knots, double clip = 0.0);

inline constexpr double kMaxMixtureMassLoss = 1e-4;

/// f_{mu,sigma}(y) = int_0^1 phi_sigma(y - mu(x)) dx on `grid`. Each linear
/// piece of mu is integrated in closed form, so no x-quadrature is needed.
/// Mass falling outside the grid is computed analytically; above 1e-4 a
/// CoverageError is thrown, otherwise the result is renormalised.
GridDensity mixture_density(const TransferFunction& mu, double sigma, const Grid& grid);

//! As above, also reporting the mass outside the grid.
GridDensity mixture_density(const TransferFunction& mu,
                            double sigma,
                            const Grid& grid,
                            double& lost_mass);

inline constexpr std::size_t kHistogramSamples = std::size_t{ 1 } << 16;

//! Bins spread evenly over [min mu, max mu]; last bin closed.
MixingHistogram induced_histogram(const TransferFunction& mu, std::size_t n_bins);

//! Explicit increasing edges that must cover the range of mu.
MixingHistogram induced_histogram(const TransferFunction& mu, std::vector<double> edges);

} // namespace nllvm
