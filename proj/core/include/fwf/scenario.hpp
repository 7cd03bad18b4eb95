#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fwf/diagnostics.hpp"
#include "fwf/functionals.hpp"
#include "fwf/grid.hpp"
#include "fwf/jko.hpp"

namespace fwf {

// A step or Sinkhorn solve that did not converge within its iteration budget.
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PotentialConfig {
  std::string kind = "quadratic";  // "quadratic" | "table"
  std::vector<double> v, dv;       // table: row-major m x n
};

struct MuConfig {
  std::string kind = "uniform";  // "uniform" | "bottleneck"
  double delta = 0;
  double ratio = 0;
};

struct InitConfig {
  std::string kind = "product";  // "product" | "flipped" | "file"
  std::string path;
};

struct RunConfig {
  int m = 0;
  int n = 0;
  double kappa = 0;
  double tau = 0;
  double t_end = 0;
  PotentialConfig potential;
  MuConfig mu;
  InitConfig init;
  StepParams solver;
  double sinkhorn_tol = 1e-10;
  int sinkhorn_max_iters = 100000;
  std::vector<double> snapshot_times;
  std::string output_dir;
};

// Relative paths inside the config (init file) resolve against base_dir.
RunConfig parse_run_config(const std::string& json_text,
                           const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& file);
std::string run_config_to_json(const RunConfig& cfg);
void validate(const RunConfig& cfg);
int step_count(const RunConfig& cfg);

struct Setup {
  Grid1D grid;
  MarginalX mu;
  SpeciesSet nu;
  EnergySpec spec;
  Coupling init;
};

Setup build_setup(const RunConfig& cfg);

struct StepRow {
  int step = 0;
  double time = 0;
  EnergyBreakdown energy;
  double wf_increment = 0;
  double dissipation = 0;
  double delta_e = 0;
  int cp_iters = 0;
  double primal_residual = 0;
  double dual_residual = 0;
  bool held = false;
};

struct TrajectoryRecord {
  std::vector<StepRow> rows;
  std::vector<double> snapshot_times;
  std::vector<std::string> snapshot_files;
  double e_star = 0;
  bool completed = false;
  std::string error;

  // Filled when RunOptions::keep_states is set.
  std::vector<Coupling> states;
  std::vector<std::vector<double>> step_pressures;  // multiplier of step k at index k-1
  Coupling r_star;
  std::vector<double> pi_star;
};

struct RunOptions {
  bool write_files = true;
  bool keep_states = false;
  std::function<void(const StepRow&)> progress;
};

TrajectoryRecord run(const RunConfig& cfg, const RunOptions& opts = {});

void write_diagnostics_csv(const std::filesystem::path& file, const TrajectoryRecord& rec);

struct RateFit {
  double slope = 0;
  double r2 = 0;
  int points = 0;
};

// Least squares of log(value) against t over the leading run of values above
// plateau_guard; values above cap (an initial transient) are skipped.
RateFit fit_log_linear(const std::vector<double>& t, const std::vector<double>& values,
                       double plateau_guard, double cap = INFINITY);
RateFit fit_convergence_rate(const TrajectoryRecord& rec, double plateau_guard,
                             double cap = INFINITY);

Trajectory load_trajectory(const std::filesystem::path& dir);

struct CompareReport {
  StabilityTable table;
  std::filesystem::path csv;
};

CompareReport compare_runs(const std::filesystem::path& dir_a, const std::filesystem::path& dir_b,
                           const std::vector<NamedZeta>& family,
                           const std::filesystem::path& out_dir);

}  // namespace fwf
