#pragma once

#include "nllvm/grid_density.hpp"
#include "nllvm/rng.hpp"

#include <vector>

namespace nllvm {

//! Smooth cutoff: 1 on [a, b], 0 outside [a - taper, b + taper], C-infinity.
double smooth_cutoff(double x, double a, double b, double taper);

/// C-infinity compactly supported test density: N(center, scale^2) times
/// smooth_cutoff(x, 0, 1, 0.5). Support is [-0.5, 1.5].
GridDensity cinf_bump(const Grid& grid, double center = 0.5, double scale = 0.15);

//! N(mean, sd^2) restricted to [a, b] and renormalised on the grid.
GridDensity truncated_normal(const Grid& grid, double mean, double sd, double a, double b);

struct NormalComponent
{
  double weight;
  double mean;
  double sd;
};

//! Finite Gaussian mixture, weights renormalised.
GridDensity gaussian_mixture(const Grid& grid, const std::vector<NormalComponent>& parts);

//! Random 1-3 component Gaussian mixture with means in [0.25, 0.75] and
//! standard deviations in [0.06, 0.15].
std::vector<NormalComponent> random_smooth_mixture(Rng& rng);

} // namespace nllvm
