#include "fwf/sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fwf {

namespace {

// -kappa log sum_k w_k exp((a_k - c_k)/kappa), max-shifted.
template <class A, class C, class W>
double softmin(int len, A a, C c, W w, double kappa) {
  double mx = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < len; ++k) mx = std::max(mx, a(k) - c(k));
  double s = 0;
  for (int k = 0; k < len; ++k) s += w(k) * std::exp((a(k) - c(k) - mx) / kappa);
  return -(mx + kappa * std::log(s));
}

}  // namespace

SinkhornResult sinkhorn_minimize(const MarginalX& mu, const SpeciesSet& nu, const Grid1D& grid,
                                 const EnergySpec& spec, double tol, int max_iters) {
  if (!(spec.kappa > 0.0)) throw ValidationError("sinkhorn: kappa must be positive");
  if (!(tol > 0.0) || max_iters < 1) throw ValidationError("sinkhorn: bad tolerance or max_iters");
  validate(grid, mu);
  validate(nu);
  if (spec.m != grid.m || spec.n != nu.size()) throw ValidationError("sinkhorn: shape mismatch");
  const int m = grid.m, n = nu.size();
  const double kappa = spec.kappa;
  std::vector<double> pi(m, 0.0), psi(n, 0.0), logmu(m);
  for (int i = 0; i < m; ++i) logmu[i] = std::log(mu.density[i]);

  SinkhornResult res;
  auto row_update = [&] {
    for (int i = 0; i < m; ++i)
      pi[i] = kappa * logmu[i] +
              softmin(n, [&](int j) { return psi[j]; }, [&](int j) { return spec.V(i, j); },
                      [&](int j) { return nu.mass[j]; }, kappa);
  };
  auto col_update = [&] {
    for (int j = 0; j < n; ++j)
      psi[j] = softmin(m, [&](int i) { return pi[i]; }, [&](int i) { return spec.V(i, j); },
                       [&](int) { return grid.dx; }, kappa);
  };
  // After a column update the Y-marginal is exact up to rounding; measure the X side.
  auto x_residual = [&] {
    double r = 0;
    for (int i = 0; i < m; ++i) {
      double s = 0;
      for (int j = 0; j < n; ++j) s += nu.mass[j] * std::exp((pi[i] + psi[j] - spec.V(i, j)) / kappa);
      r = std::max(r, std::abs(s - mu.density[i]) / mu.density[i]);
    }
    return r;
  };

  for (int it = 1; it <= max_iters; ++it) {
    row_update();
    col_update();
    res.iterations = it;
    res.marginal_residual = x_residual();
    if (res.marginal_residual <= tol) {
      res.converged = true;
      break;
    }
  }

  double mean = 0;
  for (int i = 0; i < m; ++i) mean += pi[i] * mu.density[i] * grid.dx;
  for (double& p : pi) p -= mean;
  for (double& p : psi) p += mean;

  res.r_star = Coupling(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) res.r_star(i, j) = std::exp((pi[i] + psi[j] - spec.V(i, j)) / kappa);
  res.pi_star = std::move(pi);
  res.psi_star = std::move(psi);
  res.marginal_residual = marginal_residual(res.r_star, mu, nu, grid).max();
  res.converged = res.marginal_residual <= tol;
  return res;
}

double gibbs_residual(const SinkhornResult& res, const EnergySpec& spec, const Grid1D& grid,
                      const SpeciesSet& nu) {
  const Coupling& r = res.r_star;
  if (r.m != grid.m || r.n != nu.size()) throw ValidationError("gibbs_residual: shape mismatch");
  double out = 0;
  for (int i = 0; i < r.m; ++i)
    for (int j = 0; j < r.n; ++j) {
      if (!(r(i, j) > 1e-290)) continue;
      const double d = std::log(r(i, j)) - (res.pi_star[i] + res.psi_star[j] - spec.V(i, j)) / spec.kappa;
      out = std::max(out, std::abs(d));
    }
  return out;
}

}  // namespace fwf
