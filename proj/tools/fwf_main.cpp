#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "CLI11.hpp"
#include "fwf/diagnostics.hpp"
#include "fwf/functionals.hpp"
#include "fwf/io.hpp"
#include "fwf/jko.hpp"
#include "fwf/scenario.hpp"
#include "fwf/sinkhorn.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kValidation = 2;
constexpr int kNonConvergence = 3;

struct Common {
  std::string config;
  std::string output;
  bool quiet = false;
};

fwf::RunConfig load(const Common& c) {
  fwf::RunConfig cfg = fwf::load_run_config(c.config);
  if (!c.output.empty()) cfg.output_dir = c.output;
  if (cfg.output_dir.empty()) cfg.output_dir = "fwf_out";
  return cfg;
}

int cmd_run(const Common& c) {
  const fwf::RunConfig cfg = load(c);
  fwf::RunOptions opts;
  if (!c.quiet)
    opts.progress = [](const fwf::StepRow& r) {
      std::printf("step %3d  t=%-7g E=%.10f  dE=%.3e  W=%.3e  iters=%d\n", r.step, r.time,
                  r.energy.total, r.delta_e, r.wf_increment, r.cp_iters);
      std::fflush(stdout);
    };
  const fwf::TrajectoryRecord rec = fwf::run(cfg, opts);
  if (!rec.completed) {
    std::fprintf(stderr, "fwf run: %s\n", rec.error.c_str());
    return kNonConvergence;
  }
  if (!c.quiet) std::printf("wrote %s\n", cfg.output_dir.c_str());
  return kOk;
}

int cmd_sinkhorn(const Common& c) {
  const fwf::RunConfig cfg = load(c);
  const fwf::Setup s = fwf::build_setup(cfg);
  const fwf::SinkhornResult r =
      fwf::sinkhorn_minimize(s.mu, s.nu, s.grid, s.spec, cfg.sinkhorn_tol, cfg.sinkhorn_max_iters);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  fwf::write_snapshot(dir / "reference", r.r_star);
  fwf::write_pressure_csv(dir / "reference_pressure.csv", s.grid, r.pi_star);
  {
    std::ofstream f(dir / "reference_psi.csv");
    f << "y,psi\n";
    char buf[64];
    for (int j = 0; j < s.nu.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g", s.nu.y[j], r.psi_star[j]);
      f << buf << "\n";
    }
  }
  const double e = fwf::energy(r.r_star, s.spec, s.grid, s.nu).total;
  const double gibbs = fwf::gibbs_residual(r, s.spec, s.grid, s.nu);
  json j = {{"iterations", r.iterations}, {"marginal_residual", r.marginal_residual},
            {"gibbs_residual", gibbs},     {"energy", e},
            {"converged", r.converged}};
  std::ofstream(dir / "sinkhorn.json") << j.dump(2) << "\n";
  if (!c.quiet)
    std::printf("iterations %d  residual %.3e  gibbs %.3e  E* %.15g\n", r.iterations,
                r.marginal_residual, gibbs, e);
  return r.converged ? kOk : kNonConvergence;
}

int cmd_compare(const std::string& a, const std::string& b, const Common& c) {
  const fs::path out = c.output.empty() ? fs::path(a) : fs::path(c.output);
  const auto fam = fwf::standard_zeta_family();
  const fwf::CompareReport rep = fwf::compare_runs(a, b, fam, out);
  if (!c.quiet) {
    std::printf("%10s", "time");
    for (const auto& z : fam) std::printf(" %12s", z.name.c_str());
    std::printf("\n");
    for (std::size_t k = 0; k < rep.table.times.size(); ++k) {
      std::printf("%10g", rep.table.times[k]);
      for (double v : rep.table.values[k]) std::printf(" %12.4e", v);
      std::printf("\n");
    }
    std::printf("wrote %s\n", rep.csv.string().c_str());
  }
  return kOk;
}

// Flipped Monge coupling at kappa = 0: certificate gap and one minimizing-movement step.
int cmd_stationarity(const Common& c) {
  fwf::RunConfig cfg = load(c);
  cfg.kappa = 0;
  cfg.init.kind = "product";
  const fwf::Setup s = fwf::build_setup(cfg);
  const fwf::StationarityCase sc = fwf::flipped_stationarity_case(s.grid, s.mu, s.nu);
  const auto cert = fwf::stationarity_certificate(sc, s.mu, s.nu, s.grid, s.spec, cfg.tau);
  fwf::StepParams p = cfg.solver;
  p.tau = cfg.tau;
  p.kappa = 0;
  const fwf::StepResult r = fwf::jko_step(sc.monge_coupling, s.mu, s.nu, s.grid, s.spec, p);
  const double l1 = fwf::l1_mass(r.next, sc.monge_coupling, s.grid, s.nu);
  fs::create_directories(cfg.output_dir);
  json j = {{"tau", cfg.tau},         {"tau_max", sc.tau_max},   {"gap", cert.gap},
            {"primal", cert.primal},  {"dual", cert.dual},       {"dx", s.grid.dx},
            {"step_l1_change", l1},   {"step_iterations", r.iterations},
            {"step_converged", r.converged}, {"step_held", r.held}};
  std::ofstream(fs::path(cfg.output_dir) / "stationarity.json") << j.dump(2) << "\n";
  if (!c.quiet)
    std::printf("gap %.3e (dx %.3e)  step L1 change %.3e  iterations %d  held %d\n", cert.gap,
                s.grid.dx, l1, r.iterations, static_cast<int>(r.held));
  return kOk;
}

int cmd_selftest(bool quiet) {
  int failures = 0;
  auto check = [&](bool ok, const char* what) {
    if (!quiet || !ok) std::printf("%s  %s\n", ok ? "ok  " : "FAIL", what);
    failures += !ok;
  };
  {
    const auto g = fwf::Grid1D::make(3);
    check(std::abs(fwf::w2_1d({0.5, 0.5, 0}, {0, 0.5, 0.5}, g) - g.dx) < 1e-14, "w2_1d shift by one cell");
  }
  {
    const double u = fwf::cp_prox_entropy(2.0, 1.0, 1.0, 1.0);
    check(std::abs(std::log(u) + u - 2.0) < 1e-11, "entropy prox root");
  }
  {
    const auto g = fwf::Grid1D::make(16);
    const auto mu = fwf::build_uniform_mu(g);
    const auto nu = fwf::build_equispaced_nu(4);
    const auto spec = fwf::EnergySpec::quadratic(g, nu, 0.05);
    const auto ref = fwf::sinkhorn_minimize(mu, nu, g, spec, 1e-11, 100000);
    check(ref.converged && fwf::gibbs_residual(ref, spec, g, nu) < 1e-10, "sinkhorn Gibbs form");
    fwf::StepParams p;
    p.tau = 0.25;
    p.kappa = 0.05;
    const auto prod = fwf::product_coupling(mu, nu);
    const auto r = fwf::jko_step(prod, mu, nu, g, spec, p);
    const double e0 = fwf::energy(prod, spec, g, nu).total;
    const double e1 = fwf::energy(r.next, spec, g, nu).total;
    check(r.converged && e1 < e0, "jko step decreases energy");
    check(fwf::marginal_residual(r.next, mu, nu, g).max() < 1e-10, "jko step marginals");
    const auto fix = fwf::jko_step(ref.r_star, mu, nu, g, spec, p);
    check(fwf::l1_mass(fix.next, ref.r_star, g, nu) < 1e-5, "minimizer is a fixed point");
  }
  if (!quiet) std::printf("%s\n", failures ? "selftest FAILED" : "selftest passed");
  return failures ? kFailure : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fibered Wasserstein JKO flows of entropic optimal transport"};
  app.require_subcommand(1);
  Common c;
  std::string dir_a, dir_b;

  auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* o = sub->add_option("--config", c.config, "run configuration (JSON)");
    if (need_config) o->required()->check(CLI::ExistingFile);
    sub->add_option("--output", c.output, "output directory (overrides the config)");
    sub->add_flag("--quiet", c.quiet, "suppress progress output");
  };
  auto* run = app.add_subcommand("run", "simulate a trajectory and write its outputs");
  add_common(run, true);
  auto* sk = app.add_subcommand("sinkhorn", "compute the entropic minimizer");
  add_common(sk, true);
  auto* cmp = app.add_subcommand("compare", "vertical-average distances between two runs");
  cmp->add_option("run_a", dir_a, "first run directory")->required()->check(CLI::ExistingDirectory);
  cmp->add_option("run_b", dir_b, "second run directory")->required()->check(CLI::ExistingDirectory);
  add_common(cmp, false);
  auto* st = app.add_subcommand("stationarity", "kappa = 0 certificate for the flipped Monge map");
  add_common(st, true);
  auto* self = app.add_subcommand("selftest", "quick internal consistency checks");
  self->add_flag("--quiet", c.quiet, "only report failures");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*run) return cmd_run(c);
    if (*sk) return cmd_sinkhorn(c);
    if (*cmp) return cmd_compare(dir_a, dir_b, c);
    if (*st) return cmd_stationarity(c);
    if (*self) return cmd_selftest(c.quiet);
  } catch (const fwf::ValidationError& e) {
    std::fprintf(stderr, "fwf: %s\n", e.what());
    return kValidation;
  } catch (const fwf::SolverError& e) {
    std::fprintf(stderr, "fwf: %s\n", e.what());
    return kNonConvergence;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fwf: %s\n", e.what());
    return kFailure;
  }
  return kFailure;
}
