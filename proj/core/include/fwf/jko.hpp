#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fwf/grid.hpp"

namespace fwf {

enum class Scheme {
  split,  // source marginal inside the primal prox, diagonal steps, over-relaxation
  plain,  // three dual blocks, sigma = tau = 1/||K||
};

struct StepParams {
  double tau = 0;
  double kappa = 0;
  int max_iters = 200000;
  double tol = 1e-6;       // relative marginal residual
  double gap_tol = 0;      // relative primal-dual gap; 0 leaves it as a diagnostic only
  double theta = 1.0;
  std::optional<int> bandwidth;
  Scheme scheme = Scheme::split;
  double omega = 0;        // primal weight of the split scheme; 0 selects 0.03/sqrt(n)
  double relax = 1.9;
  int check_every = 100;
};

// Banded storage: g[((j*m + ip) * L) + (i - ip + w)], L = 2w + 1.
struct StepPlan {
  int m = 0;
  int n = 0;
  int w = 0;
  std::vector<double> g;

  int L() const { return 2 * w + 1; }
  double at(int i, int ip, int j) const {
    const int d = i - ip;
    if (d < -w || d > w) return 0.0;
    return g[(static_cast<std::size_t>(j) * m + ip) * L() + (d + w)];
  }
};

// Raw multipliers in solver layout: a is species-major [j*m + i], b per row.
struct DualState {
  std::vector<double> a, b;
  bool empty() const { return b.empty(); }
};

struct StepResult {
  Coupling next;
  StepPlan plan;
  std::vector<double> pressure_dual;  // zero mu-mean
  int iterations = 0;
  double primal_residual = 0;
  double dual_residual = 0;  // relative primal-dual gap at exit
  double objective = 0;      // W_F(next, prev)^2/(2 tau) + E(next)
  bool converged = false;
  bool held = false;         // the previous iterate was returned
  bool band_limited = false;
  std::string message;
  DualState duals;  // warm start for the next step
};

// A warm start of the wrong shape is ignored.
StepResult jko_step(const Coupling& prev, const MarginalX& mu, const SpeciesSet& nu,
                    const Grid1D& grid, const EnergySpec& spec, const StepParams& params,
                    const DualState* warm = nullptr);

// Discrete JKO functional of a candidate.
double jko_functional(const Coupling& next, const Coupling& prev, const EnergySpec& spec,
                      const Grid1D& grid, const SpeciesSet& nu, double tau);

// Root u > 0 of kappa log(u/w) + sigma (u - v) = 0.
double cp_prox_entropy(double v, double sigma, double w, double kappa);
std::vector<double> cp_prox_entropy(const std::vector<double>& v, double sigma,
                                    const std::vector<double>& weights, double kappa);

double cp_operator_norm(int m, int n, std::optional<int> bandwidth, std::uint64_t seed = 7);

int resolve_bandwidth(int m, std::optional<int> bandwidth);

struct FlowResult {
  std::vector<StepResult> steps;
  bool aborted = false;
  std::string message;
};

using StepCallback = std::function<void(int step, const StepResult&)>;

// Iterate k is assigned to times [k tau, (k+1) tau).
FlowResult run_flow(const Coupling& init, int steps, const MarginalX& mu, const SpeciesSet& nu,
                    const Grid1D& grid, const EnergySpec& spec, const StepParams& params,
                    const StepCallback& on_step = {}, bool keep_plans = false);

}  // namespace fwf
