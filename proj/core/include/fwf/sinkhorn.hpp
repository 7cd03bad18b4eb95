#pragma once

#include <vector>

#include "fwf/grid.hpp"

namespace fwf {

struct SinkhornResult {
  Coupling r_star;
  std::vector<double> pi_star;   // zero mu-mean
  std::vector<double> psi_star;
  int iterations = 0;
  double marginal_residual = 0;
  bool converged = false;
};

// r*_ij = exp((pi_i + psi_j - V_ij)/kappa), log-domain alternating updates.
SinkhornResult sinkhorn_minimize(const MarginalX& mu, const SpeciesSet& nu, const Grid1D& grid,
                                 const EnergySpec& spec, double tol = 1e-10,
                                 int max_iters = 100000);

double gibbs_residual(const SinkhornResult& res, const EnergySpec& spec, const Grid1D& grid,
                      const SpeciesSet& nu);

}  // namespace fwf
