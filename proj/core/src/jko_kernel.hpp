#pragma once

namespace fwf::detail {

struct SplitSweep {
  int m, n, w;
  const double* dcost;  // (k dx)^2 / (2 tau) for k = -w..w, length 2w+1
  const double* h;      // V + qA + qB, layout [j*m + i]
  const double* prev;   // source masses, layout [j*m + ip]
  double tp;            // primal step
  double relax;
  double theta;
  double* g;            // banded plan
  double* thresh;       // warm-start thresholds, layout [j*m + ip]
  double* ab;           // out: A applied to the extrapolated point, layout [j*m + i]
};

// One primal half-step of the split scheme: per (ip, j) column, project onto
// {z >= 0, sum z = prev} and accumulate the extrapolation for the dual step.
void split_primal_sweep(const SplitSweep& s);

// Euclidean projection of z onto {x >= 0, sum x = mass}, warm started at threshold th.
void project_simplex(double* z, int len, double mass, double& th);

// Solve kappa (t - lw) + sigma (e^t - v) = 0 for t, starting from t.
// Returns false when the unguarded Newton loop fails to settle.
bool prox_entropy_log_newton(double v, double sigma, double lw, double kappa, double& t);

}  // namespace fwf::detail
