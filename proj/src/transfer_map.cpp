#include "nllvm/transfer_map.hpp"

#include "nllvm/errors.hpp"
#include "nllvm/log.hpp"
#include "nllvm/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace nllvm {

TransferFunction::TransferFunction(std::vector<double> knots, std::vector<double> values)
  : knots_(std::move(knots))
  , values_(std::move(values))
{
  if (knots_.size() < 2 || knots_.size() != values_.size())
    throw ShapeError("transfer function needs matching knots and values (at least 2)");
  if (knots_.front() != 0.0 || knots_.back() != 1.0)
    throw ParameterError("transfer function knots must start at 0 and end at 1");
  for (std::size_t i = 1; i < knots_.size(); ++i)
    if (!(knots_[i] > knots_[i - 1]))
      throw ParameterError("transfer function knots must be strictly increasing");
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!std::isfinite(values_[i]))
      throw NumericError("non-finite transfer function value", static_cast<std::ptrdiff_t>(i));
  const double n1 = static_cast<double>(knots_.size() - 1);
  uniform_ = true;
  for (std::size_t i = 0; i < knots_.size() && uniform_; ++i)
    uniform_ = std::abs(knots_[i] - static_cast<double>(i) / n1) < 1e-14;
}

TransferFunction TransferFunction::on_uniform_knots(std::vector<double> values)
{
  std::size_t n = values.size();
  if (n < 2)
    throw ShapeError("transfer function needs at least 2 values");
  std::vector<double> knots(n);
  for (std::size_t i = 0; i < n; ++i)
    knots[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  knots.back() = 1.0;
  return TransferFunction(std::move(knots), std::move(values));
}

TransferFunction TransferFunction::from_function(std::size_t n_knots,
                                                 const std::function<double(double)>& f)
{
  if (n_knots < 2)
    throw ParameterError("need at least 2 knots");
  std::vector<double> v(n_knots);
  for (std::size_t i = 0; i < n_knots; ++i)
    v[i] = f(static_cast<double>(i) / static_cast<double>(n_knots - 1));
  return on_uniform_knots(std::move(v));
}

TransferFunction TransferFunction::constant(double c)
{
  return on_uniform_knots({ c, c });
}

double TransferFunction::operator()(double x) const
{
  x = std::clamp(x, 0.0, 1.0);
  std::size_t k;
  if (uniform_) {
    k = static_cast<std::size_t>(x * static_cast<double>(knots_.size() - 1));
    k = std::min(k, knots_.size() - 2);
  } else {
    auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
    k = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - knots_.begin() - 1, 0,
                                                            static_cast<std::ptrdiff_t>(knots_.size()) - 2));
  }
  double w = (x - knots_[k]) / (knots_[k + 1] - knots_[k]);
  return (1.0 - w) * values_[k] + w * values_[k + 1];
}

double TransferFunction::min_value() const
{
  return *std::min_element(values_.begin(), values_.end());
}

double TransferFunction::max_value() const
{
  return *std::max_element(values_.begin(), values_.end());
}

double sup_distance(const TransferFunction& a, const TransferFunction& b)
{
  double best = 0.0;
  if (a.knots() == b.knots()) {
    for (std::size_t i = 0; i < a.size(); ++i)
      best = std::max(best, std::abs(a.values()[i] - b.values()[i]));
    return best;
  }
  for (double x : a.knots())
    best = std::max(best, std::abs(a(x) - b(x)));
  for (double x : b.knots())
    best = std::max(best, std::abs(a(x) - b(x)));
  return best;
}

TransferFunction quantile_of(const GridDensity& f, std::size_t n_knots, double clip)
{
  if (n_knots < kMinQuantileKnots)
    throw ParameterError("quantile_of needs at least 16 knots");
  if (!(clip >= 0.0 && clip < 0.5))
    throw ParameterError("quantile clip level must lie in [0, 0.5)");

  const Grid& g = f.grid();
  const auto c = f.cdf();
  const std::size_t n = c.size();

  std::size_t first = 1;
  while (first < n - 1 && c[first] <= 0.0)
    ++first;
  std::size_t last = first;
  while (last < n - 1 && c[last] < 1.0 - 1e-15)
    ++last;

  std::size_t first_pos = 0;
  while (first_pos < n && f[first_pos] <= 0.0)
    ++first_pos;
  std::size_t last_pos = n - 1;
  while (last_pos > first_pos && f[last_pos] <= 0.0)
    --last_pos;
  for (std::size_t i = first_pos; i < last_pos; ++i) {
    if (f[i] <= 0.0 && f[i + 1] <= 0.0) {
      warn("quantile_of: density has an interior flat region; using the left-continuous inverse");
      break;
    }
  }

  std::vector<double> levels(n_knots);
  std::vector<double> values(n_knots);
  for (std::size_t k = 0; k < n_knots; ++k) {
    double u = static_cast<double>(k) / static_cast<double>(n_knots - 1);
    levels[k] = 0.5 * (1.0 - std::cos(std::numbers::pi * u));
  }
  levels.front() = 0.0;
  levels.back() = 1.0;
  for (std::size_t k = 1; k + 1 < n_knots; ++k)
    levels[k] = std::clamp(levels[k], levels[k - 1] + 1e-15, 1.0);
  for (std::size_t k = 0; k < n_knots; ++k) {
    double t = std::clamp(levels[k], clip, 1.0 - clip);
    double y;
    if (t <= 0.0) {
      y = g.x(first - 1);
    } else if (t >= 1.0) {
      y = g.x(last);
    } else {
      auto it = std::lower_bound(c.begin(), c.end(), t);
      auto i = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - c.begin(), 1,
                                                                   static_cast<std::ptrdiff_t>(n) - 1));
      double cell = c[i] - c[i - 1];
      double w = cell > 0.0 ? (t - c[i - 1]) / cell : 0.0;
      y = g.x(i - 1) + g.step() * std::clamp(w, 0.0, 1.0);
    }
    values[k] = std::clamp(y, g.lo, g.hi);
  }
  // Guard against rounding making the map decrease by an ulp.
  for (std::size_t k = 1; k < n_knots; ++k)
    values[k] = std::max(values[k], values[k - 1]);
  return TransferFunction(std::move(levels), std::move(values));
}

namespace {

// Three-point Gauss-Legendre rule on [0, 1].
constexpr double kGlNodes[3] = { 0.1127016653792583, 0.5, 0.8872983346207417 };
constexpr double kGlWeights[3] = { 5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0 };

// Below this slope (in units of sigma per segment) the closed form loses
// precision to cancellation and the segment is integrated numerically.
constexpr double kFlatSegment = 1e-2;
constexpr double kWindow = 9.0;

} // namespace

GridDensity mixture_density(const TransferFunction& mu,
                            double sigma,
                            const Grid& grid,
                            double& lost_mass)
{
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw ParameterError("mixture bandwidth must be positive");

  const std::size_t n = grid.n;
  const double h = grid.step();
  std::vector<double> out(n, 0.0);
  double lost = 0.0;

  const auto& xk = mu.knots();
  const auto& vk = mu.values();
  for (std::size_t s = 0; s + 1 < xk.size(); ++s) {
    const double len = xk[s + 1] - xk[s];
    const double a = std::min(vk[s], vk[s + 1]);
    const double b = std::max(vk[s], vk[s + 1]);
    const bool flat = (b - a) < kFlatSegment * sigma;

    double lo_y = std::ceil((a - kWindow * sigma - grid.lo) / h);
    double hi_y = std::floor((b + kWindow * sigma - grid.lo) / h);
    auto i0 = static_cast<std::ptrdiff_t>(std::max(lo_y, 0.0));
    auto i1 = static_cast<std::ptrdiff_t>(std::min(hi_y, static_cast<double>(n - 1)));

    if (flat) {
      double m[3];
      for (int q = 0; q < 3; ++q)
        m[q] = vk[s] + (vk[s + 1] - vk[s]) * kGlNodes[q];
      for (std::ptrdiff_t i = i0; i <= i1; ++i) {
        double y = grid.x(static_cast<std::size_t>(i));
        double acc = 0.0;
        for (int q = 0; q < 3; ++q)
          acc += kGlWeights[q] * normal_pdf(y - m[q], sigma);
        out[static_cast<std::size_t>(i)] += len * acc;
      }
      for (int q = 0; q < 3; ++q) {
        lost += len * kGlWeights[q] * std_normal_cdf((grid.lo - m[q]) / sigma);
        lost += len * kGlWeights[q] * std_normal_cdf((m[q] - grid.hi) / sigma);
      }
    } else {
      const double scale = len / (b - a);
      for (std::ptrdiff_t i = i0; i <= i1; ++i) {
        double y = grid.x(static_cast<std::size_t>(i));
        out[static_cast<std::size_t>(i)] +=
          scale * std_normal_interval((y - b) / sigma, (y - a) / sigma);
      }
      double left = std_normal_cdf_integral((grid.lo - a) / sigma) -
                    std_normal_cdf_integral((grid.lo - b) / sigma);
      double right = std_normal_cdf_integral((b - grid.hi) / sigma) -
                     std_normal_cdf_integral((a - grid.hi) / sigma);
      lost += scale * sigma * (std::max(left, 0.0) + std::max(right, 0.0));
    }
  }

  lost_mass = lost;
  if (lost > kMaxMixtureMassLoss)
    throw CoverageError("mixture density domain does not cover range(mu) +- 8 sigma", lost);
  return GridDensity(grid, std::move(out));
}

GridDensity mixture_density(const TransferFunction& mu, double sigma, const Grid& grid)
{
  double lost = 0.0;
  return mixture_density(mu, sigma, grid, lost);
}

MixingHistogram induced_histogram(const TransferFunction& mu, std::vector<double> edges)
{
  if (edges.size() < 3)
    throw ParameterError("histogram needs at least 2 bins");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1]))
      throw ParameterError("histogram edges must be strictly increasing");
  if (mu.min_value() < edges.front() || mu.max_value() > edges.back())
    throw ParameterError("histogram edges must cover the range of mu");

  const std::size_t bins = edges.size() - 1;
  std::vector<std::size_t> counts(bins, 0);
  const double dx = 1.0 / static_cast<double>(kHistogramSamples);
  for (std::size_t i = 0; i < kHistogramSamples; ++i) {
    double v = mu((static_cast<double>(i) + 0.5) * dx);
    auto it = std::upper_bound(edges.begin(), edges.end(), v);
    auto b = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - edges.begin() - 1, 0,
                                                                 static_cast<std::ptrdiff_t>(bins) - 1));
    ++counts[b];
  }
  MixingHistogram hist;
  hist.bin_edges = std::move(edges);
  hist.masses.resize(bins);
  for (std::size_t b = 0; b < bins; ++b)
    hist.masses[b] = static_cast<double>(counts[b]) * dx;
  return hist;
}

MixingHistogram induced_histogram(const TransferFunction& mu, std::size_t n_bins)
{
  if (n_bins < 2)
    throw ParameterError("histogram needs at least 2 bins");
  double lo = mu.min_value();
  double hi = mu.max_value();
  if (hi - lo <= 0.0) {
    lo -= 0.5;
    hi += 0.5;
  }
  std::vector<double> edges(n_bins + 1);
  for (std::size_t i = 0; i <= n_bins; ++i)
    edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_bins);
  edges.back() = hi;
  return induced_histogram(mu, std::move(edges));
}

} // namespace nllvm
