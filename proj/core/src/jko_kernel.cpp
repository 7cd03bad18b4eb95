#include "jko_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace fwf::detail {

static void project_simplex_sorted(double* z, int len, double mass) {
  std::vector<double> buf(z, z + len);
  std::sort(buf.begin(), buf.end(), std::greater<double>());
  double cs = 0, th = 0;
  for (int k = 0; k < len; ++k) {
    cs += buf[k];
    const double t = (cs - mass) / (k + 1);
    if (k == len - 1 || buf[k + 1] <= t) {
      th = t;
      break;
    }
  }
  for (int i = 0; i < len; ++i) z[i] = std::max(z[i] - th, 0.0);
}

void project_simplex(double* z, int len, double mass, double& th) {
  if (mass <= 0.0) {
    std::fill(z, z + len, 0.0);
    return;
  }
  // Newton on the convex decreasing map t -> sum (z - t)_+ - mass. After at most
  // one overshoot the iterates approach the root from the left and stop once the
  // active set is stable.
  double t = th;
  bool done = false;
  for (int pass = 0; pass < 64; ++pass) {
    double s = 0;
    int c = 0;
    for (int i = 0; i < len; ++i) {
      const double d = z[i] - t;
      if (d > 0) {
        s += d;
        ++c;
      }
    }
    if (c == 0) {
      t = *std::max_element(z, z + len) - mass;
      continue;
    }
    const double nt = t + (s - mass) / c;
    if (std::abs(nt - t) <= 1e-15 * (std::abs(t) + mass)) {
      t = nt;
      done = true;
      break;
    }
    t = nt;
  }
  if (!done) {
    project_simplex_sorted(z, len, mass);
    return;
  }
  th = t;
  for (int i = 0; i < len; ++i) z[i] = std::max(z[i] - t, 0.0);
}

void split_primal_sweep(const SplitSweep& s) {
  const int m = s.m, w = s.w, L = 2 * w + 1;
  std::vector<double> z(L);
  std::fill(s.ab, s.ab + static_cast<std::size_t>(s.n) * m, 0.0);
  const double a1 = 1.0 + s.theta, a0 = s.theta;
  const double r1 = s.relax, r0 = 1.0 - s.relax;
  for (int j = 0; j < s.n; ++j) {
    const double* h = s.h + static_cast<std::size_t>(j) * m;
    double* ab = s.ab + static_cast<std::size_t>(j) * m;
    for (int ip = 0; ip < m; ++ip) {
      const int lo = std::max(0, ip - w), hi = std::min(m - 1, ip + w);
      const int len = hi - lo + 1, off = lo - ip + w;
      double* g = s.g + (static_cast<std::size_t>(j) * m + ip) * L + off;
      const double* dc = s.dcost + off;
      const double* hh = h + lo;
      for (int k = 0; k < len; ++k) z[k] = g[k] - s.tp * (dc[k] + hh[k]);
      project_simplex(z.data(), len, s.prev[static_cast<std::size_t>(j) * m + ip],
                      s.thresh[static_cast<std::size_t>(j) * m + ip]);
      double* a = ab + lo;
      for (int k = 0; k < len; ++k) {
        const double old = g[k];
        a[k] += a1 * z[k] - a0 * old;
        // Over-relaxation makes inactive entries decay geometrically; cut them
        // before they turn subnormal.
        const double nv = r1 * z[k] + r0 * old;
        g[k] = std::abs(nv) < 1e-250 ? 0.0 : nv;
      }
    }
  }
}

bool prox_entropy_log_newton(double v, double sigma, double lw, double kappa, double& t) {
  for (int it = 0; it < 40; ++it) {
    const double e = std::exp(t);
    const double h = kappa * (t - lw) + sigma * (e - v);
    const double dt = h / (kappa + sigma * e);
    t -= dt;
    if (std::abs(dt) <= 1e-13 * std::max(1.0, std::abs(t))) return std::isfinite(t);
  }
  return false;
}

}  // namespace fwf::detail
