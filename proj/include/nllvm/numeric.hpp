#pragma once

#include <cmath>
#include <numbers>
#include <span>

namespace nllvm {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;
inline constexpr double kLogSqrt2Pi = 0.9189385332046727417803297;

//! N(0, sigma^2) density at t.
inline double normal_pdf(double t, double sigma)
{
  double z = t / sigma;
  return kInvSqrt2Pi / sigma * std::exp(-0.5 * z * z);
}

inline double normal_logpdf(double t, double mean, double sigma)
{
  double z = (t - mean) / sigma;
  return -0.5 * z * z - std::log(sigma) - kLogSqrt2Pi;
}

//! Standard normal CDF.
inline double std_normal_cdf(double u)
{
  return 0.5 * std::erfc(-u / std::numbers::sqrt2);
}

//! Phi(hi) - Phi(lo) for lo <= hi, without cancellation in either tail.
inline double std_normal_interval(double lo, double hi)
{
  if (lo >= 0.0)
    return 0.5 * (std::erfc(lo / std::numbers::sqrt2) -
                  std::erfc(hi / std::numbers::sqrt2));
  if (hi <= 0.0)
    return 0.5 * (std::erfc(-hi / std::numbers::sqrt2) -
                  std::erfc(-lo / std::numbers::sqrt2));
  return 1.0 - 0.5 * std::erfc(hi / std::numbers::sqrt2) -
         0.5 * std::erfc(-lo / std::numbers::sqrt2);
}

//! Antiderivative of the standard normal CDF: u Phi(u) + phi(u).
inline double std_normal_cdf_integral(double u)
{
  return u * std_normal_cdf(u) + kInvSqrt2Pi * std::exp(-0.5 * u * u);
}

//! Inverse standard normal CDF.
double std_normal_quantile(double p);

//! Trapezoid rule for samples at spacing h.
inline double trapezoid(std::span<const double> v, double h)
{
  if (v.size() < 2)
    return 0.0;
  double s = 0.5 * (v.front() + v.back());
  for (std::size_t i = 1; i + 1 < v.size(); ++i)
    s += v[i];
  return s * h;
}

} // namespace nllvm
