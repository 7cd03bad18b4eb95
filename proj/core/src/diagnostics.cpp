#include "fwf/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace fwf {

PressureField pressure_solve(const Coupling& rho, const MarginalX& mu, const Grid1D& grid,
                             const SpeciesSet& nu, const EnergySpec& spec) {
  const int m = grid.m;
  if (mu.size() != m || rho.m != m || rho.n != nu.size() || spec.m != m || spec.n != nu.size())
    throw ValidationError("pressure_solve: shape mismatch");
  for (double d : mu.density)
    if (!(d > 0.0)) throw ValidationError("pressure_solve: mu must be strictly positive");
  check_coupling(rho, mu, nu, grid, 1e-6);

  std::vector<double> u(m, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < rho.n; ++j) u[i] += spec.dV(i, j) * rho(i, j) * nu.mass[j];

  PressureField out;
  out.pi.assign(m, 0.0);
  if (m == 1) return out;

  // Face f = i+1/2 carries a_f (Pi_{i+1} - Pi_i) = s_f; row i balances its two faces.
  const double dx = grid.dx;
  std::vector<double> a(m - 1), s(m - 1);
  for (int f = 0; f < m - 1; ++f) {
    a[f] = 0.5 * (mu.density[f] + mu.density[f + 1]) / dx;
    s[f] = 0.5 * (u[f] + u[f + 1]) + spec.kappa * (mu.density[f + 1] - mu.density[f]) / dx;
  }
  std::vector<double> lo(m, 0.0), di(m, 0.0), up(m, 0.0), rhs(m, 0.0);
  for (int i = 0; i < m; ++i) {
    if (i > 0) {
      lo[i] = -a[i - 1];
      di[i] += a[i - 1];
      rhs[i] += s[i - 1];
    }
    if (i < m - 1) {
      up[i] = -a[i];
      di[i] += a[i];
      rhs[i] -= s[i];
    }
  }
  // The system is singular (constants); pin Pi_0 and restore the mean afterwards.
  di[0] = 1.0;
  up[0] = 0.0;
  rhs[0] = 0.0;
  for (int i = 1; i < m; ++i) {
    const double w = lo[i] / di[i - 1];
    di[i] -= w * up[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  out.pi[m - 1] = rhs[m - 1] / di[m - 1];
  for (int i = m - 2; i >= 0; --i) out.pi[i] = (rhs[i] - up[i] * out.pi[i + 1]) / di[i];

  double mean = 0;
  for (int i = 0; i < m; ++i) mean += out.pi[i] * mu.density[i] * dx;
  for (double& p : out.pi) p -= mean;
  return out;
}

std::vector<double> grid_derivative(const std::vector<double>& f, const Grid1D& grid) {
  const int m = grid.m;
  const double dx = grid.dx;
  std::vector<double> d(m, 0.0);
  if (m == 1) return d;
  if (m == 2) {
    d[0] = d[1] = (f[1] - f[0]) / dx;
    return d;
  }
  for (int i = 1; i < m - 1; ++i) d[i] = (f[i + 1] - f[i - 1]) / (2 * dx);
  d[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * dx);
  d[m - 1] = (3 * f[m - 1] - 4 * f[m - 2] + f[m - 3]) / (2 * dx);
  return d;
}

std::vector<double> velocity_field(const Coupling& rho, const PressureField& pi, const Grid1D& grid,
                                   const EnergySpec& spec) {
  const int m = grid.m, n = rho.n;
  if (rho.m != m || static_cast<int>(pi.pi.size()) != m || spec.m != m || spec.n != n)
    throw ValidationError("velocity_field: shape mismatch");
  const std::vector<double> dpi = grid_derivative(pi.pi, grid);
  std::vector<double> v(static_cast<std::size_t>(m) * n), lr(m);
  for (int j = 0; j < n; ++j) {
    std::vector<double> dl(m, 0.0);
    if (spec.kappa > 0) {
      for (int i = 0; i < m; ++i) {
        if (!(rho(i, j) > 0.0))
          throw ValidationError("velocity_field: density must be positive when kappa > 0");
        lr[i] = std::log(rho(i, j));
      }
      dl = grid_derivative(lr, grid);
    }
    for (int i = 0; i < m; ++i)
      v[static_cast<std::size_t>(i) * n + j] = dpi[i] - spec.dV(i, j) - spec.kappa * dl[i];
  }
  return v;
}

double dissipation(const Coupling& rho, const PressureField& pi, const Grid1D& grid,
                   const SpeciesSet& nu, const EnergySpec& spec) {
  const std::vector<double> v = velocity_field(rho, pi, grid, spec);
  double s = 0;
  for (int i = 0; i < rho.m; ++i)
    for (int j = 0; j < rho.n; ++j) {
      const double vv = v[static_cast<std::size_t>(i) * rho.n + j];
      s += vv * vv * rho(i, j) * grid.dx * nu.mass[j];
    }
  return s;
}

double weak_residual_mode(const Coupling& rho_next, const PressureField& pi, const Grid1D& grid,
                          const SpeciesSet& nu, const EnergySpec& spec, int k) {
  if (k < 0) throw ValidationError("weak_residual: k must be non-negative");
  if (k == 0) return 0.0;
  const double w = k * std::numbers::pi;
  const std::vector<double> dpi = grid_derivative(pi.pi, grid);
  const std::vector<double> mu = x_marginal(rho_next, nu);
  double t = 0;
  for (int i = 0; i < grid.m; ++i) {
    const double x = grid.x[i];
    const double d1 = -w * std::sin(w * x);
    const double d2 = -w * w * std::cos(w * x);
    double drift = 0;
    for (int j = 0; j < rho_next.n; ++j) drift += spec.dV(i, j) * rho_next(i, j) * nu.mass[j];
    t += (d1 * dpi[i] * mu[i] - d1 * drift + spec.kappa * d2 * mu[i]) * grid.dx;
  }
  return std::abs(t);
}

std::vector<double> weak_residual(const Coupling& rho_prev, const Coupling& rho_next,
                                  const PressureField& pi, const Grid1D& grid, const SpeciesSet& nu,
                                  const EnergySpec& spec, double tau, int k_max) {
  if (rho_prev.m != rho_next.m || rho_prev.n != rho_next.n)
    throw ValidationError("weak_residual: shape mismatch");
  if (!(tau > 0.0)) throw ValidationError("weak_residual: tau must be positive");
  std::vector<double> out;
  for (int k = 1; k <= k_max; ++k) out.push_back(weak_residual_mode(rho_next, pi, grid, nu, spec, k));
  return out;
}

double weak_residual_bound(int k, double wf, double tau) {
  const double w = k * std::numbers::pi;
  const double c2 = std::max({1.0, w, w * w});
  return 0.5 * c2 * wf * wf / tau;
}

std::vector<NamedZeta> standard_zeta_family() {
  return {
      {"1", [](double, double) { return 1.0; }},
      {"x", [](double x, double) { return x; }},
      {"y", [](double, double y) { return y; }},
      {"xy", [](double x, double y) { return x * y; }},
      {"x2", [](double x, double) { return x * x; }},
      {"y2", [](double, double y) { return y * y; }},
  };
}

std::vector<double> vertical_average(const Coupling& rho, const Zeta& zeta, const Grid1D& grid,
                                     const SpeciesSet& nu) {
  if (rho.m != grid.m || rho.n != nu.size()) throw ValidationError("vertical_average: shape mismatch");
  std::vector<double> w(grid.m, 0.0);
  for (int i = 0; i < grid.m; ++i)
    for (int j = 0; j < rho.n; ++j) w[i] += zeta(grid.x[i], nu.y[j]) * rho(i, j) * nu.mass[j];
  return w;
}

static const Coupling& state_at(const Trajectory& t, double time, const char* which) {
  for (std::size_t k = 0; k < t.times.size(); ++k)
    if (std::abs(t.times[k] - time) <= 1e-9 * std::max(1.0, std::abs(time))) return t.states.at(k);
  std::ostringstream os;
  os << "stability_compare: trajectory " << which << " has no state at t=" << time;
  throw ValidationError(os.str());
}

StabilityTable stability_compare(const Trajectory& a, const Trajectory& b,
                                 const std::vector<NamedZeta>& family,
                                 const std::vector<double>& times) {
  if (a.grid.m != b.grid.m) throw ValidationError("stability_compare: grids differ");
  if (std::abs(a.tau - b.tau) > 1e-12 * std::max(1.0, a.tau))
    throw ValidationError("stability_compare: time steps differ");
  StabilityTable out;
  out.times = times;
  for (const auto& z : family) out.zeta_names.push_back(z.name);
  for (double t : times) {
    const Coupling& ra = state_at(a, t, "a");
    const Coupling& rb = state_at(b, t, "b");
    std::vector<double> row;
    for (const auto& z : family) {
      const auto wa = vertical_average(ra, z.f, a.grid, a.nu);
      const auto wb = vertical_average(rb, z.f, b.grid, b.nu);
      double s = 0;
      for (int i = 0; i < a.grid.m; ++i) s += (wa[i] - wb[i]) * (wa[i] - wb[i]) * a.grid.dx;
      row.push_back(std::sqrt(s));
    }
    out.values.push_back(std::move(row));
  }
  return out;
}

static Coupling block_monge(const Grid1D& grid, const SpeciesSet& nu, bool flipped) {
  const int m = grid.m, n = nu.size();
  if (m % n != 0) throw ValidationError("stationarity case: n must divide m");
  for (double w : nu.mass)
    if (std::abs(w - 1.0 / n) > 1e-12) throw ValidationError("stationarity case: nu must be uniform");
  const int k = m / n;
  Coupling c(m, n);
  for (int j = 0; j < n; ++j)
    for (int t = 0; t < k; ++t) c(flipped ? m - (j + 1) * k + t : j * k + t, j) = n;
  return c;
}

static void require_uniform(const MarginalX& mu) {
  for (double d : mu.density)
    if (std::abs(d - 1.0) > 1e-12) throw ValidationError("stationarity case: mu must be uniform");
}

StationarityCase flipped_stationarity_case(const Grid1D& grid, const MarginalX& mu,
                                           const SpeciesSet& nu) {
  require_uniform(mu);
  StationarityCase sc;
  sc.monge_coupling = block_monge(grid, nu, true);
  sc.pi_star.resize(grid.m);
  for (int i = 0; i < grid.m; ++i) sc.pi_star[i] = grid.x[i] * grid.x[i] - grid.x[i];
  // Convexity of the infimand: 1/tau + d_xx V - Pi*'' = 1/tau + 1 - 2 >= 0.
  sc.phi_hessian_bound = 2.0;
  sc.tau_max = 1.0 / (sc.phi_hessian_bound - 1.0);
  return sc;
}

StationarityCase identity_stationarity_case(const Grid1D& grid, const MarginalX& mu,
                                            const SpeciesSet& nu) {
  require_uniform(mu);
  StationarityCase sc;
  sc.monge_coupling = block_monge(grid, nu, false);
  sc.pi_star.assign(grid.m, 0.0);
  sc.phi_hessian_bound = 0.0;
  sc.tau_max = std::numeric_limits<double>::infinity();
  return sc;
}

StationarityCertificate stationarity_certificate(const StationarityCase& sc, const MarginalX& mu,
                                                 const SpeciesSet& nu, const Grid1D& grid,
                                                 const EnergySpec& spec, double tau) {
  const int m = grid.m, n = nu.size();
  if (spec.kappa != 0.0) throw ValidationError("stationarity_certificate: requires kappa = 0");
  if (!(tau > 0.0)) throw ValidationError("stationarity_certificate: tau must be positive");
  if (tau > sc.tau_max)
    throw ValidationError("stationarity_certificate: tau above tau_max, convexity not guaranteed");
  if (spec.m != m || spec.n != n || static_cast<int>(sc.pi_star.size()) != m ||
      sc.monge_coupling.m != m || sc.monge_coupling.n != n)
    throw ValidationError("stationarity_certificate: shape mismatch");
  for (int i = 0; i < m; ++i) {
    std::vector<double> s(n);
    for (int j = 0; j < n; ++j) s[j] = spec.dV(i, j);
    std::sort(s.begin(), s.end());
    for (int j = 1; j < n; ++j)
      if (!(s[j] > s[j - 1])) throw ValidationError("stationarity_certificate: twist condition fails");
  }
  check_coupling(sc.monge_coupling, mu, nu, grid, 1e-12);

  StationarityCertificate out;
  out.c_transform.resize(static_cast<std::size_t>(m) * n);
  for (int ip = 0; ip < m; ++ip)
    for (int j = 0; j < n; ++j) {
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i) {
        const double d = grid.x[i] - grid.x[ip];
        best = std::min(best, d * d / (2 * tau) + spec.V(i, j) - sc.pi_star[i]);
      }
      out.c_transform[static_cast<std::size_t>(ip) * n + j] = best;
    }
  const Coupling& g = sc.monge_coupling;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      const double mass = g(i, j) * grid.dx * nu.mass[j];
      out.primal += spec.V(i, j) * mass;
      out.dual += out.c_transform[static_cast<std::size_t>(i) * n + j] * mass;
    }
    out.dual += sc.pi_star[i] * mu.density[i] * grid.dx;
  }
  out.gap = out.primal - out.dual;
  return out;
}

}  // namespace fwf
