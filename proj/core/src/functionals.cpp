#include "fwf/functionals.hpp"

#include <cmath>
#include <string>

namespace fwf {

double entropy_density(double s) {
  if (s <= 0.0) return 1.0;
  if (s < 1e-300) return 1.0 - s;
  return s * std::log(s) - s + 1.0;
}

EnergyBreakdown energy(const Coupling& rho, const EnergySpec& spec, const Grid1D& grid,
                       const SpeciesSet& nu) {
  if (rho.m != spec.m || rho.n != spec.n || rho.m != grid.m || rho.n != nu.size())
    throw ValidationError("energy: shape mismatch");
  EnergyBreakdown e;
  for (int i = 0; i < rho.m; ++i)
    for (int j = 0; j < rho.n; ++j) {
      const double r = rho(i, j);
      if (r < -1e-12) throw ValidationError("energy: negative density entry");
      const double w = grid.dx * nu.mass[j];
      e.potential_term += spec.V(i, j) * r * w;
      e.entropy_term += entropy_density(r) * w;
    }
  e.total = e.potential_term + spec.kappa * e.entropy_term;
  return e;
}

static void check_probability(const std::vector<double>& p, const char* name) {
  double s = 0;
  for (double v : p) {
    if (v < 0.0 || !std::isfinite(v))
      throw ValidationError(std::string("w2_1d: ") + name + " has a negative or non-finite entry");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9)
    throw ValidationError(std::string("w2_1d: ") + name + " does not sum to 1");
}

double w2_1d(const std::vector<double>& p, const std::vector<double>& q, const Grid1D& grid) {
  if (static_cast<int>(p.size()) != grid.m || static_cast<int>(q.size()) != grid.m)
    throw ValidationError("w2_1d: length does not match grid");
  check_probability(p, "p");
  check_probability(q, "q");

  // Walk both quantile functions over the merged partition of [0,1].
  int a = 0, b = 0;
  double ra = p[0], rb = q[0];
  double acc = 0;
  while (true) {
    while (ra <= 0.0 && a + 1 < grid.m) ra = p[++a];
    while (rb <= 0.0 && b + 1 < grid.m) rb = q[++b];
    if (ra <= 0.0 || rb <= 0.0) break;
    const double t = ra < rb ? ra : rb;
    const double d = grid.x[a] - grid.x[b];
    acc += t * d * d;
    ra -= t;
    rb -= t;
    if (ra <= 0.0 && a + 1 >= grid.m) break;
    if (rb <= 0.0 && b + 1 >= grid.m) break;
  }
  return std::sqrt(acc);
}

double fibered_w2(const Coupling& a, const Coupling& b, const Grid1D& grid, const SpeciesSet& nu) {
  if (a.m != b.m || a.n != b.n || a.m != grid.m || a.n != nu.size())
    throw ValidationError("fibered_w2: shape mismatch");
  std::vector<double> p(grid.m), q(grid.m);
  double s = 0;
  for (int j = 0; j < a.n; ++j) {
    for (int i = 0; i < grid.m; ++i) {
      p[i] = a(i, j) * grid.dx;
      q[i] = b(i, j) * grid.dx;
    }
    double w;
    try {
      w = w2_1d(p, q, grid);
    } catch (const ValidationError& e) {
      throw ValidationError(std::string(e.what()) + " (species " + std::to_string(j) + ")");
    }
    s += nu.mass[j] * w * w;
  }
  return std::sqrt(s);
}

double delta_energy(const Coupling& rho, const Coupling& rho_star, const EnergySpec& spec,
                    const Grid1D& grid, const SpeciesSet& nu) {
  const double es = energy(rho_star, spec, grid, nu).total;
  if (!(es > 0.0)) throw ValidationError("delta_energy: reference energy must be positive");
  return (energy(rho, spec, grid, nu).total - es) / es;
}

}  // namespace fwf
