#pragma once

#include "nllvm/rng.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace nllvm {

//! Uniform grid of n points spanning [lo, hi] inclusive.
struct Grid
{
  double lo = 0.0;
  double hi = 1.0;
  std::size_t n = 1024;

  Grid() = default;
  Grid(double lo_, double hi_, std::size_t n_);

  double step() const noexcept { return (hi - lo) / static_cast<double>(n - 1); }
  double x(std::size_t i) const noexcept { return lo + step() * static_cast<double>(i); }
  std::vector<double> points() const;

  //! Same step, extended by whole steps on each side.
  Grid padded(std::size_t left, std::size_t right) const;

  //! Grid of n points covering [lo, hi]; convenience for callers that only
  //! know the window they need.
  static Grid covering(double lo, double hi, std::size_t n) { return Grid(lo, hi, n); }

  bool operator==(const Grid& other) const noexcept
  {
    return lo == other.lo && hi == other.hi && n == other.n;
  }
};

inline constexpr std::size_t kMinGridPoints = 16;

//! A probability density tabulated on a uniform grid. Values are
//! non-negative and renormalised at construction so that the trapezoid
//! integral is 1.
class GridDensity
{
public:
  GridDensity(Grid grid, std::vector<double> values);

  static GridDensity from_function(const Grid& grid,
                                   const std::function<double(double)>& f);

  const Grid& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  std::size_t size() const noexcept { return values_.size(); }

  //! Linear interpolation; zero outside [lo, hi].
  double operator()(double y) const;

  //! Cumulative trapezoid sums at the grid points (0 ... 1).
  std::vector<double> cdf() const;

  double mean() const;
  double variance() const;

  //! Zero-extended copy on grid().padded(left, right).
  GridDensity padded(std::size_t left, std::size_t right) const;

  //! Copy resampled by linear interpolation onto another grid.
  GridDensity resampled(const Grid& target) const;

  //! Inverse-CDF draws.
  std::vector<double> sample(std::size_t count, Rng& rng) const;

private:
  Grid grid_;
  std::vector<double> values_;
};

//! Tagged divergence selector.
struct DivergenceKind
{
  enum class Tag
  {
    KL,
    V,
    HellingerSq,
    L1,
    SupLogRatio,
    RenyiAlpha
  };

  Tag tag = Tag::KL;
  double alpha = 0.5;

  static DivergenceKind kl() { return { Tag::KL, 0.5 }; }
  static DivergenceKind v() { return { Tag::V, 0.5 }; }
  static DivergenceKind hellinger_sq() { return { Tag::HellingerSq, 0.5 }; }
  static DivergenceKind l1() { return { Tag::L1, 0.5 }; }
  static DivergenceKind sup_log_ratio() { return { Tag::SupLogRatio, 0.5 }; }
  //! Throws ParameterError unless 0 < alpha < 1.
  static DivergenceKind renyi(double alpha);
};

//! Floor applied to the second argument of log-ratio divergences.
inline constexpr double kDensityFloor = 1e-300;

/// Divergence between two densities on the same grid, by trapezoid
/// quadrature:
///   KL = int p log(p/q), V = int p log^2(p/q),
///   HellingerSq = (1/2) int (sqrt p - sqrt q)^2 = 1 - int sqrt(p q),
///   L1 = int |p - q|, SupLogRatio = max log(p/q) over {p > 0},
///   RenyiAlpha = log(int p^a q^(1-a)) / (a - 1).
/// Throws ShapeError for mismatched grids and NumericError (with the grid
/// index) if the integrand is not finite.
double divergence(const DivergenceKind& kind, const GridDensity& p, const GridDensity& q);

//! Convolution result with the pre-renormalisation mass loss.
struct Convolution
{
  std::vector<double> values;
  double mass_loss = 0.0;
};

/// Raw direct-quadrature convolution of (possibly signed) grid samples with
/// N(0, sigma^2), kernel truncated at +-8 sigma. No renormalisation.
/// mass_loss = (int f - int result) / int f.
Convolution convolve_values(const Grid& grid, std::span<const double> f, double sigma);

inline constexpr double kMaxConvolutionMassLoss = 1e-4;
inline constexpr double kKernelTruncation = 8.0;
inline constexpr double kMinPointsPerSigma = 4.0;

/// phi_sigma * f on the same grid. Requires 0 < sigma <= (hi - lo) / 4
/// (ParameterError) and at least four grid points per sigma
/// (ResolutionError). Mass lost through the domain edges must stay below
/// 1e-4 (CoverageError); the result is renormalised.
GridDensity convolve_gaussian(const GridDensity& f, double sigma);

//! Same as convolve_gaussian, also reporting the mass loss.
GridDensity convolve_gaussian(const GridDensity& f, double sigma, double& mass_loss);

//! Checks the bandwidth preconditions of convolve_gaussian.
void check_bandwidth(const Grid& grid, double sigma);

//! N(mean, sd^2) restricted to the grid and renormalised.
GridDensity normal_density(const Grid& grid, double mean, double sd);

} // namespace nllvm
