#include "fwf/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fwf {

Grid1D Grid1D::make(int m) {
  if (m < 1) throw ValidationError("grid: m must be positive, got " + std::to_string(m));
  Grid1D g;
  g.m = m;
  g.dx = 1.0 / m;
  g.x.resize(m);
  for (int i = 0; i < m; ++i) g.x[i] = (i + 0.5) * g.dx;
  return g;
}

MarginalX build_uniform_mu(const Grid1D& grid) {
  return MarginalX{std::vector<double>(grid.m, 1.0)};
}

MarginalX build_bottleneck_mu(const Grid1D& grid, double delta, double ratio) {
  if (!(delta > 0.0 && delta < 0.5))
    throw ValidationError("bottleneck: delta must lie in (0, 1/2)");
  if (!(ratio > 0.0)) throw ValidationError("bottleneck: ratio must be positive");
  const double eps = 1e-12;
  std::vector<char> inside(grid.m);
  int nb = 0;
  for (int i = 0; i < grid.m; ++i) {
    inside[i] = grid.x[i] >= 0.5 - delta - eps && grid.x[i] <= 0.5 + delta + eps;
    nb += inside[i];
  }
  // Fix a by the discrete normalization so that sum density*dx = 1 holds exactly.
  const double a = 1.0 / (grid.dx * ((grid.m - nb) + ratio * nb));
  MarginalX mu;
  mu.density.resize(grid.m);
  for (int i = 0; i < grid.m; ++i) mu.density[i] = inside[i] ? ratio * a : a;
  return mu;
}

SpeciesSet build_equispaced_nu(int n) {
  if (n < 1) throw ValidationError("species: n must be positive, got " + std::to_string(n));
  SpeciesSet s;
  s.y.resize(n);
  s.mass.assign(n, 1.0 / n);
  for (int j = 0; j < n; ++j) s.y[j] = (j + 0.5) / n;
  return s;
}

Coupling product_coupling(const MarginalX& mu, const SpeciesSet& nu) {
  Coupling c(mu.size(), nu.size());
  for (int i = 0; i < c.m; ++i)
    for (int j = 0; j < c.n; ++j) c(i, j) = mu.density[i];
  return c;
}

Coupling flipped_coupling(const Grid1D& grid, const MarginalX& mu, const SpeciesSet& nu) {
  const int m = grid.m, n = nu.size();
  if (m % n != 0)
    throw ValidationError("flipped coupling: n=" + std::to_string(n) + " does not divide m=" +
                          std::to_string(m));
  for (double d : mu.density)
    if (std::abs(d - 1.0) > 1e-12) throw ValidationError("flipped coupling: mu must be uniform");
  for (double w : nu.mass)
    if (std::abs(w - 1.0 / n) > 1e-12)
      throw ValidationError("flipped coupling: nu must have equal masses");
  const int k = m / n;
  Coupling c(m, n);
  for (int j = 0; j < n; ++j)
    for (int i = m - (j + 1) * k; i < m - j * k; ++i) c(i, j) = n;
  return c;
}

void validate(const Grid1D& grid, const MarginalX& mu) {
  if (mu.size() != grid.m) throw ValidationError("mu: length does not match grid");
  double s = 0;
  for (double d : mu.density) {
    if (!(d > 0.0)) throw ValidationError("mu: density must be strictly positive");
    s += d * grid.dx;
  }
  if (std::abs(s - 1.0) > 1e-12) throw ValidationError("mu: total mass is not 1");
}

void validate(const SpeciesSet& nu) {
  if (nu.y.size() != nu.mass.size() || nu.y.empty())
    throw ValidationError("nu: y and mass must be non-empty and of equal length");
  double s = 0;
  for (double w : nu.mass) {
    if (!(w > 0.0)) throw ValidationError("nu: masses must be positive");
    s += w;
  }
  if (std::abs(s - 1.0) > 1e-12) throw ValidationError("nu: total mass is not 1");
  for (std::size_t a = 0; a < nu.y.size(); ++a)
    for (std::size_t b = a + 1; b < nu.y.size(); ++b)
      if (nu.y[a] == nu.y[b]) throw ValidationError("nu: atom locations must be distinct");
}

MarginalResidual marginal_residual(const Coupling& rho, const MarginalX& mu, const SpeciesSet& nu,
                                   const Grid1D& grid) {
  MarginalResidual res;
  std::vector<double> col(rho.n, 0.0);
  for (int i = 0; i < rho.m; ++i) {
    double s = 0;
    for (int j = 0; j < rho.n; ++j) {
      s += rho(i, j) * nu.mass[j];
      col[j] += rho(i, j) * grid.dx;
    }
    res.x = std::max(res.x, std::abs(s - mu.density[i]) / mu.density[i]);
  }
  for (int j = 0; j < rho.n; ++j) res.y = std::max(res.y, std::abs(col[j] - 1.0));
  return res;
}

void check_coupling(const Coupling& rho, const MarginalX& mu, const SpeciesSet& nu,
                    const Grid1D& grid, double tol) {
  if (rho.m != grid.m || rho.n != nu.size() || mu.size() != grid.m ||
      rho.r.size() != static_cast<std::size_t>(rho.m) * rho.n)
    throw ValidationError("coupling: shape mismatch");
  for (double v : rho.r) {
    if (!std::isfinite(v)) throw ValidationError("coupling: non-finite entry");
    if (v < -1e-12) throw ValidationError("coupling: negative entry");
  }
  const auto res = marginal_residual(rho, mu, nu, grid);
  if (res.max() > tol)
    throw ValidationError("coupling: marginal residual " + std::to_string(res.max()) +
                          " exceeds " + std::to_string(tol));
}

std::vector<double> x_marginal(const Coupling& rho, const SpeciesSet& nu) {
  std::vector<double> out(rho.m, 0.0);
  for (int i = 0; i < rho.m; ++i)
    for (int j = 0; j < rho.n; ++j) out[i] += rho(i, j) * nu.mass[j];
  return out;
}

double l1_mass(const Coupling& a, const Coupling& b, const Grid1D& grid, const SpeciesSet& nu) {
  if (a.m != b.m || a.n != b.n) throw ValidationError("l1_mass: shape mismatch");
  double s = 0;
  for (int i = 0; i < a.m; ++i)
    for (int j = 0; j < a.n; ++j) s += std::abs(a(i, j) - b(i, j)) * grid.dx * nu.mass[j];
  return s;
}

EnergySpec EnergySpec::quadratic(const Grid1D& grid, const SpeciesSet& nu, double kappa) {
  if (!(kappa >= 0.0)) throw ValidationError("kappa must be non-negative");
  EnergySpec e;
  e.kappa = kappa;
  e.kind = PotentialKind::quadratic;
  e.m = grid.m;
  e.n = nu.size();
  e.v.resize(static_cast<std::size_t>(e.m) * e.n);
  e.dv.resize(e.v.size());
  for (int i = 0; i < e.m; ++i)
    for (int j = 0; j < e.n; ++j) {
      const double d = grid.x[i] - nu.y[j];
      e.v[static_cast<std::size_t>(i) * e.n + j] = 0.5 * d * d;
      e.dv[static_cast<std::size_t>(i) * e.n + j] = d;
    }
  return e;
}

EnergySpec EnergySpec::table(const Grid1D& grid, const SpeciesSet& nu, double kappa,
                             std::vector<double> v, std::vector<double> dv) {
  if (!(kappa >= 0.0)) throw ValidationError("kappa must be non-negative");
  const std::size_t sz = static_cast<std::size_t>(grid.m) * nu.size();
  if (v.size() != sz || dv.size() != sz)
    throw ValidationError("potential table: expected " + std::to_string(sz) + " entries");
  for (double t : v)
    if (!(t >= 0.0) || !std::isfinite(t))
      throw ValidationError("potential table: V must be finite and non-negative");
  for (double t : dv)
    if (!std::isfinite(t)) throw ValidationError("potential table: dV must be finite");
  EnergySpec e;
  e.kappa = kappa;
  e.kind = PotentialKind::table;
  e.m = grid.m;
  e.n = nu.size();
  e.v = std::move(v);
  e.dv = std::move(dv);
  return e;
}

}  // namespace fwf
