#include "nllvm/grid_density.hpp"

#include "nllvm/errors.hpp"
#include "nllvm/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nllvm {

Grid::Grid(double lo_, double hi_, std::size_t n_)
  : lo(lo_)
  , hi(hi_)
  , n(n_)
{
  if (!(std::isfinite(lo) && std::isfinite(hi)) || !(hi > lo))
    throw ParameterError("grid needs finite lo < hi");
  if (n < kMinGridPoints)
    throw ParameterError("grid needs at least 16 points");
}

std::vector<double> Grid::points() const
{
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i)
    xs[i] = x(i);
  return xs;
}

Grid Grid::padded(std::size_t left, std::size_t right) const
{
  double h = step();
  return Grid(lo - h * static_cast<double>(left),
              hi + h * static_cast<double>(right),
              n + left + right);
}

GridDensity::GridDensity(Grid grid, std::vector<double> values)
  : grid_(grid)
  , values_(std::move(values))
{
  if (values_.size() != grid_.n)
    throw ShapeError("value count does not match grid size");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i]))
      throw NumericError("non-finite density value", static_cast<std::ptrdiff_t>(i));
    if (values_[i] < 0.0)
      throw ParameterError("negative density value at index " + std::to_string(i));
  }
  double mass = trapezoid(values_, grid_.step());
  if (!(mass > 0.0))
    throw ParameterError("density has zero mass on its grid");
  for (double& v : values_)
    v /= mass;
}

GridDensity GridDensity::from_function(const Grid& grid,
                                       const std::function<double(double)>& f)
{
  std::vector<double> v(grid.n);
  for (std::size_t i = 0; i < grid.n; ++i)
    v[i] = f(grid.x(i));
  return GridDensity(grid, std::move(v));
}

double GridDensity::operator()(double y) const
{
  if (y < grid_.lo || y > grid_.hi)
    return 0.0;
  double pos = (y - grid_.lo) / grid_.step();
  auto i = static_cast<std::size_t>(pos);
  if (i >= grid_.n - 1)
    return values_.back();
  double w = pos - static_cast<double>(i);
  return (1.0 - w) * values_[i] + w * values_[i + 1];
}

std::vector<double> GridDensity::cdf() const
{
  std::vector<double> c(values_.size(), 0.0);
  double h = grid_.step();
  for (std::size_t i = 1; i < values_.size(); ++i)
    c[i] = c[i - 1] + 0.5 * h * (values_[i - 1] + values_[i]);
  double total = c.back();
  for (double& v : c)
    v /= total;
  return c;
}

double GridDensity::mean() const
{
  std::vector<double> w(values_.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = grid_.x(i) * values_[i];
  return trapezoid(w, grid_.step());
}

double GridDensity::variance() const
{
  double m = mean();
  std::vector<double> w(values_.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    double d = grid_.x(i) - m;
    w[i] = d * d * values_[i];
  }
  return trapezoid(w, grid_.step());
}

GridDensity GridDensity::padded(std::size_t left, std::size_t right) const
{
  std::vector<double> v(left, 0.0);
  v.insert(v.end(), values_.begin(), values_.end());
  v.insert(v.end(), right, 0.0);
  return GridDensity(grid_.padded(left, right), std::move(v));
}

GridDensity GridDensity::resampled(const Grid& target) const
{
  std::vector<double> v(target.n);
  for (std::size_t i = 0; i < target.n; ++i)
    v[i] = (*this)(target.x(i));
  return GridDensity(target, std::move(v));
}

std::vector<double> GridDensity::sample(std::size_t count, Rng& rng) const
{
  auto c = cdf();
  double h = grid_.step();
  std::vector<double> out(count);
  for (auto& y : out) {
    double u = rng.uniform();
    auto it = std::lower_bound(c.begin(), c.end(), u);
    auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - c.begin()));
    k = std::min(k, c.size() - 1);
    // The density is linear on the cell, so the cell CDF is quadratic;
    // invert it exactly.
    double f0 = values_[k - 1];
    double f1 = values_[k];
    double cell = c[k] - c[k - 1];
    double frac = cell > 0.0 ? (u - c[k - 1]) / cell : 0.5;
    double slope = f1 - f0;
    double t;
    if (std::abs(slope) < 1e-12 * std::max(f0, f1) || f0 + f1 <= 0.0) {
      t = frac;
    } else {
      // Solve f0 t + slope t^2 / 2 = frac (f0 + f1) / 2 for t in [0, 1].
      double rhs = frac * 0.5 * (f0 + f1);
      double disc = f0 * f0 + 2.0 * slope * rhs;
      t = (-f0 + std::sqrt(std::max(0.0, disc))) / slope;
    }
    y = grid_.x(k - 1) + h * std::clamp(t, 0.0, 1.0);
  }
  return out;
}

DivergenceKind DivergenceKind::renyi(double alpha)
{
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ParameterError("Renyi order must lie in (0, 1)");
  return { Tag::RenyiAlpha, alpha };
}

namespace {

void check_finite(std::span<const double> integrand, const char* what)
{
  for (std::size_t i = 0; i < integrand.size(); ++i)
    if (!std::isfinite(integrand[i]))
      throw NumericError(std::string("non-finite ") + what + " integrand",
                         static_cast<std::ptrdiff_t>(i));
}

} // namespace

double divergence(const DivergenceKind& kind, const GridDensity& p, const GridDensity& q)
{
  if (!(p.grid() == q.grid()))
    throw ShapeError("divergence requires densities on the same grid");
  const std::size_t n = p.size();
  const double h = p.grid().step();
  std::vector<double> f(n, 0.0);
  using Tag = DivergenceKind::Tag;

  switch (kind.tag) {
    case Tag::KL:
    case Tag::V:
      for (std::size_t i = 0; i < n; ++i) {
        if (p[i] > 0.0) {
          double lr = std::log(p[i] / std::max(q[i], kDensityFloor));
          f[i] = kind.tag == Tag::KL ? p[i] * lr : p[i] * lr * lr;
        }
      }
      check_finite(f, kind.tag == Tag::KL ? "KL" : "V");
      return trapezoid(f, h);
    case Tag::HellingerSq:
      for (std::size_t i = 0; i < n; ++i) {
        double d = std::sqrt(p[i]) - std::sqrt(q[i]);
        f[i] = 0.5 * d * d;
      }
      check_finite(f, "Hellinger");
      return trapezoid(f, h);
    case Tag::L1:
      for (std::size_t i = 0; i < n; ++i)
        f[i] = std::abs(p[i] - q[i]);
      check_finite(f, "L1");
      return trapezoid(f, h);
    case Tag::SupLogRatio: {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        if (p[i] > 0.0) {
          double lr = std::log(p[i] / std::max(q[i], kDensityFloor));
          if (!std::isfinite(lr))
            throw NumericError("non-finite log ratio", static_cast<std::ptrdiff_t>(i));
          best = std::max(best, lr);
        }
      }
      return best;
    }
    case Tag::RenyiAlpha: {
      const double a = kind.alpha;
      if (!(a > 0.0 && a < 1.0))
        throw ParameterError("Renyi order must lie in (0, 1)");
      for (std::size_t i = 0; i < n; ++i)
        f[i] = (p[i] > 0.0 && q[i] > 0.0)
                 ? std::exp(a * std::log(p[i]) + (1.0 - a) * std::log(q[i]))
                 : 0.0;
      check_finite(f, "Renyi");
      double affinity = trapezoid(f, h);
      double r = std::log(affinity) / (a - 1.0);
      if (!std::isfinite(r))
        throw NumericError("non-finite Renyi divergence (disjoint supports)");
      return r;
    }
  }
  throw ParameterError("unknown divergence kind");
}

void check_bandwidth(const Grid& grid, double sigma)
{
  if (!(sigma > 0.0) || sigma > (grid.hi - grid.lo) / 4.0) {
    std::ostringstream os;
    os << "sigma " << sigma << " outside (0, (hi - lo) / 4]";
    throw ParameterError(os.str());
  }
  if (sigma < kMinPointsPerSigma * grid.step()) {
    std::ostringstream os;
    os << "grid step " << grid.step() << " too coarse for sigma " << sigma
       << " (need 4 points per sigma)";
    throw ResolutionError(os.str());
  }
}

Convolution convolve_values(const Grid& grid, std::span<const double> f, double sigma)
{
  const std::size_t n = grid.n;
  const double h = grid.step();
  const auto half = static_cast<std::ptrdiff_t>(std::floor(kKernelTruncation * sigma / h));
  std::vector<double> kernel(static_cast<std::size_t>(2 * half + 1));
  for (std::ptrdiff_t m = -half; m <= half; ++m)
    kernel[static_cast<std::size_t>(m + half)] = normal_pdf(static_cast<double>(m) * h, sigma) * h;

  // Trapezoid weights on the source grid: endpoints count half.
  std::vector<double> src(f.begin(), f.end());
  src.front() *= 0.5;
  src.back() *= 0.5;

  Convolution out;
  out.values.assign(n, 0.0);
  const auto sn = static_cast<std::ptrdiff_t>(n);
  for (std::ptrdiff_t k = 0; k < sn; ++k) {
    double fk = src[static_cast<std::size_t>(k)];
    if (fk == 0.0)
      continue;
    std::ptrdiff_t i0 = std::max<std::ptrdiff_t>(0, k - half);
    std::ptrdiff_t i1 = std::min<std::ptrdiff_t>(sn - 1, k + half);
    const double* kp = kernel.data() + (i0 - k + half);
    double* op = out.values.data() + i0;
    for (std::ptrdiff_t i = i0; i <= i1; ++i)
      *op++ += fk * *kp++;
  }
  double before = trapezoid(f, h);
  double after = trapezoid(out.values, h);
  out.mass_loss = before != 0.0 ? (before - after) / before : 0.0;
  return out;
}

GridDensity convolve_gaussian(const GridDensity& f, double sigma, double& mass_loss)
{
  check_bandwidth(f.grid(), sigma);
  auto conv = convolve_values(f.grid(), f.values(), sigma);
  mass_loss = conv.mass_loss;
  if (std::abs(conv.mass_loss) >= kMaxConvolutionMassLoss)
    throw CoverageError("convolution loses mass through the grid edges", conv.mass_loss);
  for (double& v : conv.values)
    v = std::max(v, 0.0);
  return GridDensity(f.grid(), std::move(conv.values));
}

GridDensity convolve_gaussian(const GridDensity& f, double sigma)
{
  double loss = 0.0;
  return convolve_gaussian(f, sigma, loss);
}

GridDensity normal_density(const Grid& grid, double mean, double sd)
{
  return GridDensity::from_function(grid, [&](double y) { return normal_pdf(y - mean, sd); });
}

} // namespace nllvm
