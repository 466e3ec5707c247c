#include "nllvm/slope_fit.hpp"

#include "nllvm/errors.hpp"

#include <cmath>

namespace nllvm {

LineFit slope_fit(const std::vector<double>& xs, const std::vector<double>& ys, bool log_scale)
{
  if (xs.size() != ys.size())
    throw ShapeError("slope_fit needs equally long xs and ys");
  if (xs.size() < 3)
    throw ParameterError("slope_fit needs at least 3 points");

  const std::size_t n = xs.size();
  std::vector<double> u(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (log_scale) {
      if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
        throw DomainError("slope_fit in log mode needs positive values");
      u[i] = std::log(xs[i]);
      v[i] = std::log(ys[i]);
    } else {
      u[i] = xs[i];
      v[i] = ys[i];
    }
  }

  double mu = 0.0, mv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mu += u[i];
    mv += v[i];
  }
  mu /= static_cast<double>(n);
  mv /= static_cast<double>(n);
  double suu = 0.0, suv = 0.0, svv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    suu += (u[i] - mu) * (u[i] - mu);
    suv += (u[i] - mu) * (v[i] - mv);
    svv += (v[i] - mv) * (v[i] - mv);
  }
  if (!(suu > 0.0))
    throw ParameterError("slope_fit needs distinct xs");

  LineFit fit;
  fit.slope = suv / suu;
  fit.intercept = mv - fit.slope * mu;
  if (svv > 1e-24 * (1.0 + mv * mv) * static_cast<double>(n)) {
    double r2 = suv * suv / (suu * svv);
    fit.r2 = std::min(std::max(r2, 0.0), 1.0);
  } else {
    fit.slope = 0.0;
    fit.r2 = 0.0;
  }
  return fit;
}

} // namespace nllvm
