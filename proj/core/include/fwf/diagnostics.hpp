#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fwf/grid.hpp"

namespace fwf {

struct PressureField {
  std::vector<double> pi;
};

// Face-flux Neumann discretization of the pressure equation, zero mu-mean.
PressureField pressure_solve(const Coupling& rho, const MarginalX& mu, const Grid1D& grid,
                             const SpeciesSet& nu, const EnergySpec& spec);

// Centered differences inside, one-sided second order at the two boundary cells.
std::vector<double> grid_derivative(const std::vector<double>& f, const Grid1D& grid);

// v_ij = D(pi)_i - dV_ij - kappa D(log r_.j)_i, row-major m x n
std::vector<double> velocity_field(const Coupling& rho, const PressureField& pi, const Grid1D& grid,
                                   const EnergySpec& spec);

double dissipation(const Coupling& rho, const PressureField& pi, const Grid1D& grid,
                   const SpeciesSet& nu, const EnergySpec& spec);

// Residual of the weak equation for xi(x) = cos(k pi x); k = 0 gives exactly 0.
double weak_residual_mode(const Coupling& rho_next, const PressureField& pi, const Grid1D& grid,
                          const SpeciesSet& nu, const EnergySpec& spec, int k);

// Entries for k = 1..k_max. rho_prev enters only through the bound.
std::vector<double> weak_residual(const Coupling& rho_prev, const Coupling& rho_next,
                                  const PressureField& pi, const Grid1D& grid, const SpeciesSet& nu,
                                  const EnergySpec& spec, double tau, int k_max);

// 1/2 ||xi_k||_{C^2} W_F^2 / tau with ||xi_k||_{C^2} = max(1, k pi, (k pi)^2).
double weak_residual_bound(int k, double wf, double tau);

using Zeta = std::function<double(double x, double y)>;

struct NamedZeta {
  std::string name;
  Zeta f;
};

// {1, x, y, xy, x^2, y^2}
std::vector<NamedZeta> standard_zeta_family();

std::vector<double> vertical_average(const Coupling& rho, const Zeta& zeta, const Grid1D& grid,
                                     const SpeciesSet& nu);

struct Trajectory {
  Grid1D grid;
  SpeciesSet nu;
  double tau = 0;
  std::vector<double> times;
  std::vector<Coupling> states;
};

struct StabilityTable {
  std::vector<double> times;
  std::vector<std::string> zeta_names;
  std::vector<std::vector<double>> values;  // [time][zeta], L2(dx) distances
};

StabilityTable stability_compare(const Trajectory& a, const Trajectory& b,
                                 const std::vector<NamedZeta>& family,
                                 const std::vector<double>& times);

struct StationarityCase {
  double phi_hessian_bound = 0;
  double tau_max = 0;
  Coupling monge_coupling;
  std::vector<double> pi_star;  // on the grid
};

// T(x) = 1 - x with Pi*(x) = x^2 - x, for V = |x-y|^2/2.
StationarityCase flipped_stationarity_case(const Grid1D& grid, const MarginalX& mu,
                                           const SpeciesSet& nu);
// T(x) = x with Pi* = 0.
StationarityCase identity_stationarity_case(const Grid1D& grid, const MarginalX& mu,
                                            const SpeciesSet& nu);

struct StationarityCertificate {
  double gap = 0;
  double primal = 0;
  double dual = 0;
  std::vector<double> c_transform;  // Psi*(x_i', y_j), row-major m x n
};

StationarityCertificate stationarity_certificate(const StationarityCase& sc, const MarginalX& mu,
                                                 const SpeciesSet& nu, const Grid1D& grid,
                                                 const EnergySpec& spec, double tau);

}  // namespace fwf
