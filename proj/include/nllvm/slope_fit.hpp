#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nllvm {

struct LineFit
{
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares of ys on xs, on log-log scale when `log_scale`.
/// Needs at least 3 points and non-identical xs (ParameterError); in log
/// mode every value must be positive (DomainError). Constant ys give slope
/// 0 and r2 0.
LineFit slope_fit(const std::vector<double>& xs, const std::vector<double>& ys, bool log_scale = true);

//! Plot-ready rows written as a CSV sidecar.
struct Table
{
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct SlopeReport
{
  std::vector<double> xs;
  std::vector<double> ys;
  double slope = 0.0;
  double r2 = 0.0;
  std::optional<double> target;
  bool pass = false;
  //! Set when the data violate an experiment precondition (e.g. non-monotone errors).
  bool invalid = false;
  bool insufficient_points = false;
  std::uint64_t seed = 0;
  std::map<std::string, double> metrics;
  Table table;
};

struct CheckReport
{
  std::string name;
  std::size_t trials = 0;
  std::size_t violations = 0;
  double worst_margin = -std::numeric_limits<double>::infinity();
  bool pass = false;
  std::map<std::string, double> params;
  std::map<std::string, double> metrics;
  std::uint64_t seed = 0;
  Table table;

  //! Records one trial with margin = lhs - allowed (violation when > 0).
  void record(double margin)
  {
    ++trials;
    if (margin > 0.0)
      ++violations;
    worst_margin = std::max(worst_margin, margin);
  }
};

} // namespace nllvm
