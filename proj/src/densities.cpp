#include "nllvm/densities.hpp"

#include "nllvm/errors.hpp"
#include "nllvm/numeric.hpp"

#include <algorithm>
#include <cmath>

namespace nllvm {

namespace {

double smooth_step_base(double t)
{
  return t > 0.0 ? std::exp(-1.0 / t) : 0.0;
}

} // namespace

double smooth_cutoff(double x, double a, double b, double taper)
{
  double d = std::max({ 0.0, a - x, x - b }) / taper;
  if (d >= 1.0)
    return 0.0;
  double up = smooth_step_base(1.0 - d);
  return up / (up + smooth_step_base(d));
}

GridDensity cinf_bump(const Grid& grid, double center, double scale)
{
  return GridDensity::from_function(grid, [&](double x) {
    return normal_pdf(x - center, scale) * smooth_cutoff(x, 0.0, 1.0, 0.5);
  });
}

GridDensity truncated_normal(const Grid& grid, double mean, double sd, double a, double b)
{
  if (!(b > a))
    throw ParameterError("truncation interval must be non-empty");
  return GridDensity::from_function(grid, [&](double x) {
    return (x < a || x > b) ? 0.0 : normal_pdf(x - mean, sd);
  });
}

GridDensity gaussian_mixture(const Grid& grid, const std::vector<NormalComponent>& parts)
{
  if (parts.empty())
    throw ParameterError("mixture needs at least one component");
  return GridDensity::from_function(grid, [&](double x) {
    double s = 0.0;
    for (const auto& c : parts)
      s += c.weight * normal_pdf(x - c.mean, c.sd);
    return s;
  });
}

std::vector<NormalComponent> random_smooth_mixture(Rng& rng)
{
  auto k = 1 + static_cast<int>(rng.uniform() * 3.0);
  k = std::min(k, 3);
  std::vector<NormalComponent> parts;
  for (int i = 0; i < k; ++i)
    parts.push_back({ rng.uniform(0.5, 1.5), rng.uniform(0.25, 0.75), rng.uniform(0.06, 0.15) });
  return parts;
}

} // namespace nllvm
