#pragma once

#include <vector>

#include "fwf/grid.hpp"

namespace fwf {

struct EnergyBreakdown {
  double potential_term = 0;
  double entropy_term = 0;
  double total = 0;
};

// s log s - s + 1 with 0 log 0 = 0
double entropy_density(double s);

EnergyBreakdown energy(const Coupling& rho, const EnergySpec& spec, const Grid1D& grid,
                       const SpeciesSet& nu);

// Exact 2-Wasserstein distance between sum p_i delta_{x_i} and sum q_i delta_{x_i}.
double w2_1d(const std::vector<double>& p, const std::vector<double>& q, const Grid1D& grid);

double fibered_w2(const Coupling& a, const Coupling& b, const Grid1D& grid, const SpeciesSet& nu);

double delta_energy(const Coupling& rho, const Coupling& rho_star, const EnergySpec& spec,
                    const Grid1D& grid, const SpeciesSet& nu);

}  // namespace fwf
