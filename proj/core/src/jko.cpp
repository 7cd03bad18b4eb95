#include "fwf/jko.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "fwf/functionals.hpp"
#include "jko_kernel.hpp"

namespace fwf {

namespace {

using std::size_t;

// Solver-side data in species-major layout [j*m + i].
struct Problem {
  int m, n, w, L;
  double kappa, tau, dx;
  std::vector<double> dcost;  // offset -w..w
  std::vector<double> v;
  std::vector<double> wgt;    // dx nu_j
  std::vector<double> lw;     // log wgt
  std::vector<double> prev;   // masses
  std::vector<double> row_target;
  std::vector<double> col_target;
};

Problem make_problem(const Coupling& prev, const MarginalX& mu, const SpeciesSet& nu,
                     const Grid1D& grid, const EnergySpec& spec, const StepParams& p) {
  Problem P;
  P.m = grid.m;
  P.n = nu.size();
  P.w = resolve_bandwidth(grid.m, p.bandwidth);
  P.L = 2 * P.w + 1;
  P.kappa = p.kappa;
  P.tau = p.tau;
  P.dx = grid.dx;
  P.dcost.resize(P.L);
  for (int k = -P.w; k <= P.w; ++k) {
    const double d = k * grid.dx;
    P.dcost[k + P.w] = d * d / (2.0 * p.tau);
  }
  const size_t mn = static_cast<size_t>(P.m) * P.n;
  P.v.resize(mn);
  P.wgt.resize(mn);
  P.lw.resize(mn);
  P.prev.resize(mn);
  P.col_target.assign(P.n, 0.0);
  for (int j = 0; j < P.n; ++j)
    for (int i = 0; i < P.m; ++i) {
      const size_t k = static_cast<size_t>(j) * P.m + i;
      P.v[k] = spec.V(i, j);
      P.wgt[k] = grid.dx * nu.mass[j];
      P.lw[k] = std::log(P.wgt[k]);
      P.prev[k] = std::max(prev(i, j), 0.0) * P.wgt[k];
      P.col_target[j] += P.prev[k];
    }
  P.row_target.resize(P.m);
  for (int i = 0; i < P.m; ++i) P.row_target[i] = mu.density[i] * grid.dx;
  return P;
}

void apply_A(const Problem& P, const std::vector<double>& g, std::vector<double>& out) {
  out.assign(static_cast<size_t>(P.m) * P.n, 0.0);
  for (int j = 0; j < P.n; ++j)
    for (int ip = 0; ip < P.m; ++ip) {
      const int lo = std::max(0, ip - P.w), hi = std::min(P.m - 1, ip + P.w);
      const double* gg = &g[(static_cast<size_t>(j) * P.m + ip) * P.L + (lo - ip + P.w)];
      double* a = &out[static_cast<size_t>(j) * P.m + lo];
      for (int k = 0; k <= hi - lo; ++k) a[k] += gg[k];
    }
}

void row_sums(const Problem& P, const std::vector<double>& a, std::vector<double>& out) {
  out.assign(P.m, 0.0);
  for (int j = 0; j < P.n; ++j)
    for (int i = 0; i < P.m; ++i) out[i] += a[static_cast<size_t>(j) * P.m + i];
}

double row_residual(const Problem& P, const std::vector<double>& rows) {
  double r = 0;
  for (int i = 0; i < P.m; ++i)
    r = std::max(r, std::abs(rows[i] - P.row_target[i]) / P.row_target[i]);
  return r;
}

void identity_plan(const Problem& P, std::vector<double>& g) {
  g.assign(static_cast<size_t>(P.n) * P.m * P.L, 0.0);
  for (int j = 0; j < P.n; ++j)
    for (int ip = 0; ip < P.m; ++ip)
      g[(static_cast<size_t>(j) * P.m + ip) * P.L + P.w] = P.prev[static_cast<size_t>(j) * P.m + ip];
}

double entropy_mass(double p, double w) {
  if (p <= 0.0) return w;
  return p * std::log(p / w) - p + w;
}

// Primal value of the banded plan and the dual value of (qA, qB) with the
// source marginal minimized out exactly. Returns (P - D)/|P|.
double relative_gap(const Problem& P, const std::vector<double>& g, const std::vector<double>& a,
                    const std::vector<double>& qA, const std::vector<double>& qB,
                    double* primal_out = nullptr) {
  double primal = 0, dual = 0;
  for (int j = 0; j < P.n; ++j)
    for (int ip = 0; ip < P.m; ++ip) {
      const int lo = std::max(0, ip - P.w), hi = std::min(P.m - 1, ip + P.w);
      const int off = lo - ip + P.w;
      const double* gg = &g[(static_cast<size_t>(j) * P.m + ip) * P.L + off];
      const double* dc = &P.dcost[off];
      double mn = std::numeric_limits<double>::infinity();
      for (int k = 0; k <= hi - lo; ++k) {
        const size_t e = static_cast<size_t>(j) * P.m + lo + k;
        primal += gg[k] * dc[k];
        double c = dc[k] + P.v[e] + qB[lo + k];
        if (P.kappa > 0) c += qA[e];
        mn = std::min(mn, c);
      }
      dual += P.prev[static_cast<size_t>(j) * P.m + ip] * mn;
    }
  for (size_t e = 0; e < a.size(); ++e) {
    primal += P.v[e] * a[e];
    if (P.kappa > 0) {
      primal += P.kappa * entropy_mass(a[e], P.wgt[e]);
      dual -= P.kappa * P.wgt[e] * std::expm1(qA[e] / P.kappa);
    }
  }
  for (int i = 0; i < P.m; ++i) dual -= qB[i] * P.row_target[i];
  if (primal_out) *primal_out = primal;
  return (primal - dual) / std::max(std::abs(primal), 1e-300);
}

void prox_entropy_conj(const Problem& P, double sA, double relax, const std::vector<double>& ab,
                       std::vector<double>& qA, std::vector<double>& tw) {
  for (size_t e = 0; e < qA.size(); ++e) {
    const double v = qA[e] + sA * ab[e];
    double t = tw[e];
    if (!detail::prox_entropy_log_newton(v / sA, sA, P.lw[e], P.kappa, t))
      t = std::log(cp_prox_entropy(v / sA, sA, P.wgt[e], P.kappa));
    tw[e] = t;
    qA[e] = (1.0 - relax) * qA[e] + relax * (v - sA * std::exp(t));
  }
}

struct Iterate {
  std::vector<double> g, qA, qB;
  int iterations = 0;
  double residual = 0;
  double gap = 0;
  double primal = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
};

// Marginal residual and relative objective change over the last window within
// tol; the primal-dual gap is an additional requirement only when gap_tol > 0.
bool check_stop(const StepParams& prm, Iterate& it, double residual, double gap, double primal) {
  const double change = std::abs(primal - it.primal) / std::max(std::abs(primal), 1e-300);
  it.residual = residual;
  it.gap = gap;
  it.primal = primal;
  return residual <= prm.tol && change <= prm.tol && (prm.gap_tol <= 0 || std::abs(gap) <= prm.gap_tol);
}

void init_duals(const Problem& P, const DualState* warm, Iterate& it) {
  const size_t mn = static_cast<size_t>(P.m) * P.n;
  if (warm && warm->a.size() == mn && warm->b.size() == static_cast<size_t>(P.m)) {
    it.qA = warm->a;
    it.qB = warm->b;
  } else {
    it.qA.assign(mn, 0.0);
    it.qB.assign(P.m, 0.0);
  }
}

Iterate solve_split(const Problem& P, const StepParams& prm, const DualState* warm) {
  const size_t mn = static_cast<size_t>(P.m) * P.n;
  const double omega = prm.omega > 0 ? prm.omega : 0.03 / std::sqrt(static_cast<double>(P.n));
  const double lrow = std::min(P.m, P.L);
  const double tp = omega / 2.0;
  const double sA = 1.0 / (omega * lrow);
  const double sB = 1.0 / (omega * lrow * P.n);
  const double rho = prm.relax;

  Iterate it;
  identity_plan(P, it.g);
  init_duals(P, warm, it);
  std::vector<double> ab, bb, h(mn), thresh(mn, 0.0), tw(P.lw), a, rows;
  apply_A(P, it.g, ab);
  row_sums(P, ab, bb);

  detail::SplitSweep sw{P.m, P.n, P.w, P.dcost.data(), h.data(), P.prev.data(), tp, rho,
                        prm.theta, it.g.data(), thresh.data(), nullptr};
  for (int k = 1; k <= prm.max_iters; ++k) {
    if (P.kappa > 0) prox_entropy_conj(P, sA, rho, ab, it.qA, tw);
    for (int i = 0; i < P.m; ++i) it.qB[i] += rho * sB * (bb[i] - P.row_target[i]);
    for (int j = 0; j < P.n; ++j)
      for (int i = 0; i < P.m; ++i) {
        const size_t e = static_cast<size_t>(j) * P.m + i;
        h[e] = P.v[e] + it.qB[i] + (P.kappa > 0 ? it.qA[e] : 0.0);
      }
    sw.ab = ab.data();
    detail::split_primal_sweep(sw);
    row_sums(P, ab, bb);
    it.iterations = k;
    if (k % prm.check_every == 0 || k == prm.max_iters) {
      apply_A(P, it.g, a);
      row_sums(P, a, rows);
      double primal = 0;
      const double gap = relative_gap(P, it.g, a, it.qA, it.qB, &primal);
      if (check_stop(prm, it, row_residual(P, rows), gap, primal)) {
        it.converged = true;
        break;
      }
    }
  }
  return it;
}

// Three dual blocks (A with entropy, B and C equalities), plain step sizes.
Iterate solve_plain(const Problem& P, const StepParams& prm, const DualState* warm) {
  const size_t mn = static_cast<size_t>(P.m) * P.n;
  const double s = 1.0 / cp_operator_norm(P.m, P.n, P.w);
  Iterate it;
  identity_plan(P, it.g);
  init_duals(P, warm, it);
  std::vector<double> qC(mn, 0.0), gbar(it.g.size()), ab, bb, a, rows, tw(P.lw);
  for (int k = 1; k <= prm.max_iters; ++k) {
    for (int j = 0; j < P.n; ++j)
      for (int ip = 0; ip < P.m; ++ip) {
        const int lo = std::max(0, ip - P.w), hi = std::min(P.m - 1, ip + P.w);
        const int off = lo - ip + P.w;
        const size_t base = (static_cast<size_t>(j) * P.m + ip) * P.L + off;
        const double qc = qC[static_cast<size_t>(j) * P.m + ip];
        for (int t = 0; t <= hi - lo; ++t) {
          const size_t e = static_cast<size_t>(j) * P.m + lo + t;
          const double grad = P.dcost[off + t] + P.v[e] + (P.kappa > 0 ? it.qA[e] : 0.0) +
                              it.qB[lo + t] + qc;
          const double old = it.g[base + t];
          const double nw = std::max(old - s * grad, 0.0);
          it.g[base + t] = nw;
          gbar[base + t] = nw + prm.theta * (nw - old);
        }
      }
    apply_A(P, gbar, ab);
    if (P.kappa > 0) prox_entropy_conj(P, s, 1.0, ab, it.qA, tw);
    row_sums(P, ab, bb);
    for (int i = 0; i < P.m; ++i) it.qB[i] += s * (bb[i] - P.row_target[i]);
    for (int j = 0; j < P.n; ++j)
      for (int ip = 0; ip < P.m; ++ip) {
        const int lo = std::max(0, ip - P.w), hi = std::min(P.m - 1, ip + P.w);
        const size_t base = (static_cast<size_t>(j) * P.m + ip) * P.L + (lo - ip + P.w);
        double c = 0;
        for (int t = 0; t <= hi - lo; ++t) c += gbar[base + t];
        const size_t e = static_cast<size_t>(j) * P.m + ip;
        qC[e] += s * (c - P.prev[e]);
      }
    it.iterations = k;
    if (k % prm.check_every == 0 || k == prm.max_iters) {
      apply_A(P, it.g, a);
      row_sums(P, a, rows);
      double res = row_residual(P, rows);
      for (int j = 0; j < P.n; ++j)
        for (int ip = 0; ip < P.m; ++ip) {
          const int lo = std::max(0, ip - P.w), hi = std::min(P.m - 1, ip + P.w);
          const size_t base = (static_cast<size_t>(j) * P.m + ip) * P.L + (lo - ip + P.w);
          double c = 0;
          for (int t = 0; t <= hi - lo; ++t) c += it.g[base + t];
          const size_t e = static_cast<size_t>(j) * P.m + ip;
          res = std::max(res, std::abs(c - P.prev[e]) / P.wgt[e]);
        }
      double primal = 0;
      const double gap = relative_gap(P, it.g, a, it.qA, it.qB, &primal);
      if (check_stop(prm, it, res, gap, primal)) {
        it.converged = true;
        break;
      }
    }
  }
  return it;
}

// The over-relaxed iterate is an affine, not convex, combination of feasible
// columns and can dip below zero; project each column back onto its simplex.
void project_columns(const Problem& P, std::vector<double>& g) {
  std::vector<double> z(P.L);
  for (int j = 0; j < P.n; ++j)
    for (int ip = 0; ip < P.m; ++ip) {
      const int lo = std::max(0, ip - P.w), hi = std::min(P.m - 1, ip + P.w);
      const size_t base = (static_cast<size_t>(j) * P.m + ip) * P.L + (lo - ip + P.w);
      const int len = hi - lo + 1;
      double th = 0;
      std::copy(g.begin() + base, g.begin() + base + len, z.begin());
      detail::project_simplex(z.data(), len, P.prev[static_cast<size_t>(j) * P.m + ip], th);
      std::copy(z.begin(), z.begin() + len, g.begin() + base);
    }
}

// Alternate row and column scalings until both marginals hold to rounding.
// Returns the largest relative column error left after the final row scaling.
double polish_marginals(const Problem& P, std::vector<double>& a) {
  std::vector<double> rows, cols(P.n);
  auto col_error = [&] {
    double err = 0;
    for (int j = 0; j < P.n; ++j) {
      double c = 0;
      for (int i = 0; i < P.m; ++i) c += a[static_cast<size_t>(j) * P.m + i];
      err = std::max(err, std::abs(c - P.col_target[j]) / P.col_target[j]);
    }
    return err;
  };
  for (int sweep = 0; sweep < 500; ++sweep) {
    for (int j = 0; j < P.n; ++j) {
      double c = 0;
      for (int i = 0; i < P.m; ++i) c += a[static_cast<size_t>(j) * P.m + i];
      if (c > 0)
        for (int i = 0; i < P.m; ++i) a[static_cast<size_t>(j) * P.m + i] *= P.col_target[j] / c;
    }
    row_sums(P, a, rows);
    double err = 0;
    for (int i = 0; i < P.m; ++i) {
      err = std::max(err, std::abs(rows[i] - P.row_target[i]) / P.row_target[i]);
      if (rows[i] > 0)
        for (int j = 0; j < P.n; ++j) a[static_cast<size_t>(j) * P.m + i] *= P.row_target[i] / rows[i];
    }
    if (err < 1e-14) break;
  }
  return col_error();
}

Coupling to_coupling(const Problem& P, const std::vector<double>& a) {
  Coupling c(P.m, P.n);
  for (int i = 0; i < P.m; ++i)
    for (int j = 0; j < P.n; ++j) {
      const size_t e = static_cast<size_t>(j) * P.m + i;
      c(i, j) = a[e] / P.wgt[e];
    }
  return c;
}

}  // namespace

int resolve_bandwidth(int m, std::optional<int> bandwidth) {
  if (m <= 1) return 0;
  if (bandwidth) {
    if (*bandwidth < 1) throw ValidationError("bandwidth must be at least 1");
    return std::min(*bandwidth, m - 1);
  }
  if (m <= 64) return m - 1;
  return std::min(m - 1, (m + 1) / 2);
}

double jko_functional(const Coupling& next, const Coupling& prev, const EnergySpec& spec,
                      const Grid1D& grid, const SpeciesSet& nu, double tau) {
  const double wf = fibered_w2(next, prev, grid, nu);
  return wf * wf / (2.0 * tau) + energy(next, spec, grid, nu).total;
}

double cp_prox_entropy(double v, double sigma, double w, double kappa) {
  if (!(w > 0.0) || !(sigma > 0.0)) throw ValidationError("cp_prox_entropy: w, sigma must be > 0");
  if (!(kappa > 0.0)) return std::max(v, std::numeric_limits<double>::min());
  const double lw = std::log(w);
  auto h = [&](double t) { return kappa * (t - lw) + sigma * (std::exp(t) - v); };
  // h is increasing in t = log u; bracket the root.
  double hi = std::max(lw, std::log(std::max(v, w)));
  double lo = v > 0.0 ? std::min(lw, std::log(v)) : lw - sigma * (w + std::abs(v)) / kappa;
  while (h(lo) > 0.0) lo -= 1.0 + std::abs(lo);
  while (h(hi) < 0.0) hi += 1.0 + std::abs(hi);
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double ht = h(t);
    const double scale = kappa + sigma * (std::abs(v) + std::exp(t));
    if (std::abs(ht) <= 1e-12 * scale) break;
    if (ht > 0) hi = t; else lo = t;
    double nt = t - ht / (kappa + sigma * std::exp(t));
    if (!(nt > lo && nt < hi)) nt = 0.5 * (lo + hi);
    if (nt == t) break;
    t = nt;
  }
  return std::exp(t);
}

std::vector<double> cp_prox_entropy(const std::vector<double>& v, double sigma,
                                    const std::vector<double>& weights, double kappa) {
  if (v.size() != weights.size()) throw ValidationError("cp_prox_entropy: size mismatch");
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = cp_prox_entropy(v[k], sigma, weights[k], kappa);
  return out;
}

double cp_operator_norm(int m, int n, std::optional<int> bandwidth, std::uint64_t seed) {
  if (m < 1 || n < 1) throw ValidationError("cp_operator_norm: m, n must be positive");
  Problem P;
  P.m = m;
  P.n = n;
  P.w = resolve_bandwidth(m, bandwidth);
  P.L = 2 * P.w + 1;
  const size_t N = static_cast<size_t>(n) * m * P.L;
  std::vector<char> valid(N, 0);
  for (int j = 0; j < n; ++j)
    for (int ip = 0; ip < m; ++ip)
      for (int d = -P.w; d <= P.w; ++d)
        if (ip + d >= 0 && ip + d < m) valid[(static_cast<size_t>(j) * m + ip) * P.L + d + P.w] = 1;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.5, 1.5);
  std::vector<double> g(N, 0.0), out(N), a, rows, cols(static_cast<size_t>(m) * n);
  for (size_t k = 0; k < N; ++k)
    if (valid[k]) g[k] = U(rng);
  double lambda = 0;
  for (int it = 0; it < 50; ++it) {
    double nrm = 0;
    for (double v : g) nrm += v * v;
    nrm = std::sqrt(nrm);
    for (double& v : g) v /= nrm;
    apply_A(P, g, a);
    row_sums(P, a, rows);
    std::fill(cols.begin(), cols.end(), 0.0);
    for (size_t k = 0; k < N; ++k) cols[k / P.L] += g[k];
    // K^T K g = A^T A g + B^T B g + C^T C g
    lambda = 0;
    for (int j = 0; j < n; ++j)
      for (int ip = 0; ip < m; ++ip)
        for (int d = -P.w; d <= P.w; ++d) {
          const size_t k = (static_cast<size_t>(j) * m + ip) * P.L + d + P.w;
          if (!valid[k]) continue;
          const int i = ip + d;
          out[k] = a[static_cast<size_t>(j) * m + i] + rows[i] + cols[static_cast<size_t>(j) * m + ip];
          lambda += out[k] * g[k];
        }
    g.swap(out);
  }
  return 1.01 * std::sqrt(lambda);
}

StepResult jko_step(const Coupling& prev, const MarginalX& mu, const SpeciesSet& nu,
                    const Grid1D& grid, const EnergySpec& spec, const StepParams& params,
                    const DualState* warm) {
  if (!(params.tau > 0.0)) throw ValidationError("jko_step: tau must be positive");
  if (!(params.tol > 0.0)) throw ValidationError("jko_step: tol must be positive");
  if (!(params.gap_tol >= 0.0)) throw ValidationError("jko_step: gap_tol must be non-negative");
  if (!(params.kappa >= 0.0)) throw ValidationError("jko_step: kappa must be non-negative");
  if (params.max_iters < 1 || params.check_every < 1)
    throw ValidationError("jko_step: max_iters and check_every must be positive");
  if (params.theta < 0.0 || params.theta > 1.0) throw ValidationError("jko_step: theta must lie in [0,1]");
  if (!(params.relax > 0.0 && params.relax < 2.0))
    throw ValidationError("jko_step: relax must lie in (0,2)");
  if (spec.m != grid.m || spec.n != nu.size()) throw ValidationError("jko_step: energy spec shape");
  check_coupling(prev, mu, nu, grid, 1e-6);

  DualState warm_local;
  const Problem P = make_problem(prev, mu, nu, grid, spec, params);
  // With kappa = 0 the plan can sit on a support where scaling cannot restore
  // exact marginals from a loose iterate; tighten and resume from the duals.
  StepParams prm = params;
  Iterate it;
  std::vector<double> a;
  double left = 0;
  int total_iters = 0;
  for (int attempt = 0;; ++attempt) {
    it = prm.scheme == Scheme::split ? solve_split(P, prm, warm) : solve_plain(P, prm, warm);
    total_iters += it.iterations;
    project_columns(P, it.g);
    apply_A(P, it.g, a);
    left = polish_marginals(P, a);
    if (left <= 1e-12 || !it.converged || attempt == 3) break;
    prm.tol *= 1e-2;
    warm_local = DualState{it.qA, it.qB};
    warm = &warm_local;
  }

  StepResult res;
  res.iterations = total_iters;
  res.primal_residual = it.residual;
  res.dual_residual = it.gap;
  const bool feasible = left <= 1e-9;
  res.converged = it.converged && feasible;

  if (P.w < P.m - 1) {
    double edge = 0;
    for (int j = 0; j < P.n; ++j)
      for (int ip = 0; ip < P.m; ++ip) {
        const size_t base = (static_cast<size_t>(j) * P.m + ip) * P.L;
        if (ip - P.w >= 0) edge += it.g[base];
        if (ip + P.w < P.m) edge += it.g[base + P.L - 1];
      }
    if (edge > 1e-9) {
      res.band_limited = true;
      res.converged = false;
      std::ostringstream os;
      os << "plan carries mass " << edge << " on the outermost band diagonals (w=" << P.w
         << "); widen the bandwidth";
      res.message = os.str();
    }
  }
  if (!feasible && res.message.empty()) {
    std::ostringstream os;
    os << "marginal scaling left a relative column error of " << left << " after "
       << total_iters << " iterations";
    res.message = os.str();
  }
  if (!it.converged && res.message.empty()) {
    std::ostringstream os;
    os << "no convergence in " << it.iterations << " iterations (residual " << it.residual
       << ", gap " << it.gap << ")";
    res.message = os.str();
  }

  if (P.kappa > 0) {
    bool zero = false;
    for (double v : a) zero = zero || !(v > 0.0);
    if (zero) {
      // Entropy has infinite slope at 0, so a tiny product component only lowers the objective.
      const double eps = 1e-12;
      for (int j = 0; j < P.n; ++j)
        for (int i = 0; i < P.m; ++i) {
          const size_t e = static_cast<size_t>(j) * P.m + i;
          a[e] = (1.0 - eps) * a[e] + eps * P.row_target[i] * P.col_target[j];
        }
    }
  }

  EnergySpec local = spec;
  local.kappa = params.kappa;
  Coupling cand = to_coupling(P, a);
  const double f_prev = energy(prev, local, grid, nu).total;
  const double f_cand = feasible ? jko_functional(cand, prev, local, grid, nu, params.tau) : f_prev;
  if (f_cand < f_prev) {
    res.next = std::move(cand);
    res.objective = f_cand;
    res.plan = StepPlan{P.m, P.n, P.w, std::move(it.g)};
  } else {
    res.held = true;
    res.next = prev;
    res.objective = f_prev;
    std::vector<double> g;
    identity_plan(P, g);
    res.plan = StepPlan{P.m, P.n, P.w, std::move(g)};
  }

  res.pressure_dual.resize(P.m);
  double mean = 0;
  for (int i = 0; i < P.m; ++i) {
    res.pressure_dual[i] = -it.qB[i];
    mean += res.pressure_dual[i] * P.row_target[i];
  }
  for (double& v : res.pressure_dual) v -= mean;
  res.duals = DualState{std::move(it.qA), std::move(it.qB)};
  return res;
}

FlowResult run_flow(const Coupling& init, int steps, const MarginalX& mu, const SpeciesSet& nu,
                    const Grid1D& grid, const EnergySpec& spec, const StepParams& params,
                    const StepCallback& on_step, bool keep_plans) {
  if (steps < 1) throw ValidationError("run_flow: steps must be at least 1");
  FlowResult out;
  Coupling cur = init;
  DualState warm;
  for (int k = 0; k < steps; ++k) {
    StepResult r = jko_step(cur, mu, nu, grid, spec, params, &warm);
    if (on_step) on_step(k + 1, r);
    if (!keep_plans) r.plan.g = {};
    const bool ok = r.converged;
    if (ok) {
      cur = r.next;
      warm = r.duals;
    }
    out.steps.push_back(std::move(r));
    if (!ok) {
      out.aborted = true;
      out.message = "step " + std::to_string(k + 1) + ": " + out.steps.back().message;
      break;
    }
  }
  return out;
}

}  // namespace fwf
