#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fwf {

// Thrown for rejected inputs (bad parameters, infeasible couplings, malformed files).
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Grid1D {
  int m = 0;
  double dx = 0;
  std::vector<double> x;  // cell midpoints

  static Grid1D make(int m);
};

struct MarginalX {
  std::vector<double> density;
  int size() const { return static_cast<int>(density.size()); }
};

struct SpeciesSet {
  std::vector<double> y;
  std::vector<double> mass;
  int size() const { return static_cast<int>(y.size()); }
};

// Density of a plan with respect to dx (x) nu. Row-major, species fastest.
struct Coupling {
  int m = 0;
  int n = 0;
  std::vector<double> r;

  Coupling() = default;
  Coupling(int m_, int n_, double fill = 0.0)
      : m(m_), n(n_), r(static_cast<std::size_t>(m_) * n_, fill) {}

  double& operator()(int i, int j) { return r[static_cast<std::size_t>(i) * n + j]; }
  double operator()(int i, int j) const { return r[static_cast<std::size_t>(i) * n + j]; }
};

enum class PotentialKind { quadratic, table };

struct EnergySpec {
  double kappa = 0;
  PotentialKind kind = PotentialKind::quadratic;
  int m = 0;
  int n = 0;
  std::vector<double> v;   // V(x_i, y_j), row-major m x n
  std::vector<double> dv;  // d/dx V(x_i, y_j)

  double V(int i, int j) const { return v[static_cast<std::size_t>(i) * n + j]; }
  double dV(int i, int j) const { return dv[static_cast<std::size_t>(i) * n + j]; }

  // V(x,y) = |x-y|^2/2
  static EnergySpec quadratic(const Grid1D& grid, const SpeciesSet& nu, double kappa);
  static EnergySpec table(const Grid1D& grid, const SpeciesSet& nu, double kappa,
                          std::vector<double> v, std::vector<double> dv);
};

MarginalX build_uniform_mu(const Grid1D& grid);
MarginalX build_bottleneck_mu(const Grid1D& grid, double delta, double ratio);
SpeciesSet build_equispaced_nu(int n);

Coupling product_coupling(const MarginalX& mu, const SpeciesSet& nu);
Coupling flipped_coupling(const Grid1D& grid, const MarginalX& mu, const SpeciesSet& nu);

void validate(const Grid1D& grid, const MarginalX& mu);
void validate(const SpeciesSet& nu);

struct MarginalResidual {
  double x = 0;  // max_i |sum_j r_ij nu_j - mu_i| / mu_i
  double y = 0;  // max_j |sum_i r_ij dx - 1|
  double max() const { return x > y ? x : y; }
};

MarginalResidual marginal_residual(const Coupling& rho, const MarginalX& mu, const SpeciesSet& nu,
                                   const Grid1D& grid);

// Rejects shape mismatches, negative entries below -1e-12 and marginal residual above tol.
void check_coupling(const Coupling& rho, const MarginalX& mu, const SpeciesSet& nu,
                    const Grid1D& grid, double tol);

std::vector<double> x_marginal(const Coupling& rho, const SpeciesSet& nu);

// Sum_ij |a_ij - b_ij| dx nu_j
double l1_mass(const Coupling& a, const Coupling& b, const Grid1D& grid, const SpeciesSet& nu);

}  // namespace fwf
