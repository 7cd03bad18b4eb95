#include "fwf/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "fwf/io.hpp"
#include "fwf/sinkhorn.hpp"
#include "json.hpp"

namespace fwf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw ValidationError("config: unknown key '" + it.key() + "' in " + where);
}

template <class T>
T required(const json& j, const char* key) {
  if (!j.contains(key)) throw ValidationError(std::string("config: missing required key '") + key + "'");
  return j.at(key).get<T>();
}

bool is_multiple(double t, double tau) {
  const double k = std::round(t / tau);
  return std::abs(k * tau - t) <= 1e-12 * std::max(1.0, std::abs(t));
}

std::vector<double> default_snapshot_times(double t_end, double tau) {
  std::vector<double> out{0.0};
  for (double t : {1.0, 2.5, 5.0, 10.0})
    if (t < t_end && is_multiple(t, tau)) out.push_back(t);
  if (t_end > 0) out.push_back(t_end);
  return out;
}

std::string scheme_name(Scheme s) { return s == Scheme::split ? "split" : "plain"; }

}  // namespace

RunConfig parse_run_config(const std::string& text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("config: top level must be an object");
  RunConfig c;
  try {
    reject_unknown(j, {"m", "n", "kappa", "tau", "t_end", "potential", "mu", "init", "solver",
                       "sinkhorn_tol", "sinkhorn_max_iters", "snapshot_times", "output_dir"},
                   "top level");
    c.m = required<int>(j, "m");
    c.n = required<int>(j, "n");
    c.kappa = required<double>(j, "kappa");
    c.tau = required<double>(j, "tau");
    c.t_end = required<double>(j, "t_end");
    if (j.contains("potential")) {
      const json& p = j["potential"];
      reject_unknown(p, {"kind", "v", "dv"}, "potential");
      c.potential.kind = p.value("kind", "quadratic");
      if (p.contains("v")) c.potential.v = p["v"].get<std::vector<double>>();
      if (p.contains("dv")) c.potential.dv = p["dv"].get<std::vector<double>>();
    }
    if (j.contains("mu")) {
      const json& p = j["mu"];
      reject_unknown(p, {"kind", "delta", "ratio"}, "mu");
      c.mu.kind = p.value("kind", "uniform");
      c.mu.delta = p.value("delta", 0.0);
      c.mu.ratio = p.value("ratio", 0.0);
    }
    if (j.contains("init")) {
      const json& p = j["init"];
      reject_unknown(p, {"kind", "path"}, "init");
      c.init.kind = p.value("kind", "product");
      c.init.path = p.value("path", "");
      if (!c.init.path.empty() && fs::path(c.init.path).is_relative() && !base_dir.empty())
        c.init.path = (base_dir / c.init.path).string();
    }
    c.solver.tau = c.tau;
    c.solver.kappa = c.kappa;
    if (j.contains("solver")) {
      const json& s = j["solver"];
      reject_unknown(s, {"max_iters", "tol", "gap_tol", "theta", "bandwidth", "scheme", "omega",
                         "relax", "check_every"},
                     "solver");
      c.solver.max_iters = s.value("max_iters", c.solver.max_iters);
      c.solver.tol = s.value("tol", c.solver.tol);
      c.solver.gap_tol = s.value("gap_tol", c.solver.gap_tol);
      c.solver.theta = s.value("theta", c.solver.theta);
      c.solver.omega = s.value("omega", c.solver.omega);
      c.solver.relax = s.value("relax", c.solver.relax);
      c.solver.check_every = s.value("check_every", c.solver.check_every);
      if (s.contains("bandwidth") && !s["bandwidth"].is_null()) c.solver.bandwidth = s["bandwidth"].get<int>();
      const std::string scheme = s.value("scheme", "split");
      if (scheme == "split") c.solver.scheme = Scheme::split;
      else if (scheme == "plain") c.solver.scheme = Scheme::plain;
      else throw ValidationError("config: solver.scheme must be 'split' or 'plain'");
    }
    c.sinkhorn_tol = j.value("sinkhorn_tol", c.sinkhorn_tol);
    c.sinkhorn_max_iters = j.value("sinkhorn_max_iters", c.sinkhorn_max_iters);
    if (j.contains("snapshot_times")) c.snapshot_times = j["snapshot_times"].get<std::vector<double>>();
    else if (c.tau > 0 && c.t_end >= 0) c.snapshot_times = default_snapshot_times(c.t_end, c.tau);
    c.output_dir = j.value("output_dir", "");
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  validate(c);
  return c;
}

RunConfig load_run_config(const fs::path& file) {
  std::ifstream f(file);
  if (!f) throw ValidationError("config: cannot open " + file.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_run_config(ss.str(), file.parent_path());
}

std::string run_config_to_json(const RunConfig& c) {
  json j;
  j["m"] = c.m;
  j["n"] = c.n;
  j["kappa"] = c.kappa;
  j["tau"] = c.tau;
  j["t_end"] = c.t_end;
  j["potential"] = {{"kind", c.potential.kind}};
  if (c.potential.kind == "table") {
    j["potential"]["v"] = c.potential.v;
    j["potential"]["dv"] = c.potential.dv;
  }
  j["mu"] = {{"kind", c.mu.kind}};
  if (c.mu.kind == "bottleneck") {
    j["mu"]["delta"] = c.mu.delta;
    j["mu"]["ratio"] = c.mu.ratio;
  }
  j["init"] = {{"kind", c.init.kind}};
  if (c.init.kind == "file") j["init"]["path"] = c.init.path;
  j["solver"] = {{"max_iters", c.solver.max_iters}, {"tol", c.solver.tol},
                 {"gap_tol", c.solver.gap_tol},     {"theta", c.solver.theta},
                 {"scheme", scheme_name(c.solver.scheme)},
                 {"omega", c.solver.omega},         {"relax", c.solver.relax},
                 {"check_every", c.solver.check_every}};
  j["solver"]["bandwidth"] = c.solver.bandwidth ? json(*c.solver.bandwidth) : json(nullptr);
  j["sinkhorn_tol"] = c.sinkhorn_tol;
  j["sinkhorn_max_iters"] = c.sinkhorn_max_iters;
  j["snapshot_times"] = c.snapshot_times;
  j["output_dir"] = c.output_dir;
  return j.dump(2);
}

void validate(const RunConfig& c) {
  if (c.m < 1 || c.n < 1) throw ValidationError("config: m and n must be positive");
  if (!(c.kappa >= 0.0)) throw ValidationError("config: kappa must be non-negative");
  if (!(c.tau > 0.0)) throw ValidationError("config: tau must be positive");
  if (!(c.t_end >= 0.0)) throw ValidationError("config: t_end must be non-negative");
  if (!is_multiple(c.t_end, c.tau)) throw ValidationError("config: t_end must be a multiple of tau");
  for (double t : c.snapshot_times)
    if (t < 0 || t > c.t_end * (1 + 1e-12) || !is_multiple(t, c.tau))
      throw ValidationError("config: snapshot time " + time_label(t) +
                            " is not a multiple of tau within [0, t_end]");
  if (c.potential.kind != "quadratic" && c.potential.kind != "table")
    throw ValidationError("config: potential.kind must be 'quadratic' or 'table'");
  if (c.mu.kind != "uniform" && c.mu.kind != "bottleneck")
    throw ValidationError("config: mu.kind must be 'uniform' or 'bottleneck'");
  if (c.init.kind != "product" && c.init.kind != "flipped" && c.init.kind != "file")
    throw ValidationError("config: init.kind must be 'product', 'flipped' or 'file'");
  if (c.init.kind == "file" && c.init.path.empty())
    throw ValidationError("config: init.path is required for init.kind 'file'");
  if (!(c.sinkhorn_tol > 0.0) || c.sinkhorn_max_iters < 1)
    throw ValidationError("config: bad Sinkhorn tolerance or iteration budget");
  if (!(c.solver.tol > 0.0) || !(c.solver.gap_tol >= 0.0) || c.solver.max_iters < 1)
    throw ValidationError("config: bad solver tolerance or iteration budget");
  if (c.solver.bandwidth && *c.solver.bandwidth < 1)
    throw ValidationError("config: solver.bandwidth must be at least 1");
}

int step_count(const RunConfig& c) { return static_cast<int>(std::llround(c.t_end / c.tau)); }

Setup build_setup(const RunConfig& c) {
  validate(c);
  Setup s;
  s.grid = Grid1D::make(c.m);
  s.mu = c.mu.kind == "uniform" ? build_uniform_mu(s.grid)
                                : build_bottleneck_mu(s.grid, c.mu.delta, c.mu.ratio);
  s.nu = build_equispaced_nu(c.n);
  s.spec = c.potential.kind == "quadratic"
               ? EnergySpec::quadratic(s.grid, s.nu, c.kappa)
               : EnergySpec::table(s.grid, s.nu, c.kappa, c.potential.v, c.potential.dv);
  if (c.init.kind == "product") s.init = product_coupling(s.mu, s.nu);
  else if (c.init.kind == "flipped") s.init = flipped_coupling(s.grid, s.mu, s.nu);
  else {
    s.init = read_snapshot(c.init.path);
    if (s.init.m != c.m || s.init.n != c.n)
      throw ValidationError("config: initial snapshot shape does not match m, n");
  }
  check_coupling(s.init, s.mu, s.nu, s.grid, 1e-6);
  return s;
}

void write_diagnostics_csv(const fs::path& file, const TrajectoryRecord& rec) {
  std::ofstream f(file);
  if (!f) throw std::runtime_error("cannot write " + file.string());
  f << "step,time,energy_total,energy_potential,energy_entropy,wf_increment,dissipation,delta_e,"
       "cp_iters,primal_residual,dual_residual\n";
  char buf[512];
  for (const auto& r : rec.rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g,%.17g",
                  r.step, r.time, r.energy.total, r.energy.potential_term, r.energy.entropy_term,
                  r.wf_increment, r.dissipation, r.delta_e, r.cp_iters, r.primal_residual,
                  r.dual_residual);
    f << buf << "\n";
  }
}

TrajectoryRecord run(const RunConfig& cfg, const RunOptions& opts) {
  Setup s = build_setup(cfg);
  const int steps = step_count(cfg);
  StepParams params = cfg.solver;
  params.tau = cfg.tau;
  params.kappa = cfg.kappa;

  TrajectoryRecord rec;
  const fs::path dir = cfg.output_dir.empty() ? fs::path(".") : fs::path(cfg.output_dir);
  std::vector<fs::path> written;
  json snaps = json::array();
  if (opts.write_files) fs::create_directories(dir);

  auto write_manifest = [&](const std::string& status) {
    if (!opts.write_files) return;
    const fs::path diag = dir / "diagnostics.csv";
    write_diagnostics_csv(diag, rec);
    json m;
    m["config"] = json::parse(run_config_to_json(cfg));
    m["status"] = status;
    if (!rec.error.empty()) m["error"] = rec.error;
    m["snapshots"] = snaps;
    m["e_star"] = rec.e_star;
    int held = 0;
    for (const auto& r : rec.rows) held += r.held;
    m["steps_held"] = held;
    json sums = json::object();
    std::vector<fs::path> all = written;
    all.push_back(diag);
    for (const auto& p : all) sums[p.filename().string()] = "fnv1a64:" + hex64(fnv1a_file(p));
    m["checksums"] = sums;
    std::ofstream f(dir / "manifest.json");
    f << m.dump(2) << "\n";
  };

  SinkhornResult ref;
  if (cfg.kappa > 0) {
    ref = sinkhorn_minimize(s.mu, s.nu, s.grid, s.spec, cfg.sinkhorn_tol, cfg.sinkhorn_max_iters);
    if (!ref.converged) {
      rec.error = "Sinkhorn reference did not reach tolerance (residual " +
                  std::to_string(ref.marginal_residual) + ")";
      write_manifest("error");
      return rec;
    }
    rec.e_star = energy(ref.r_star, s.spec, s.grid, s.nu).total;
    if (opts.write_files) {
      for (auto& p : write_snapshot(dir / "reference", ref.r_star)) written.push_back(p);
      written.push_back(write_pressure_csv(dir / "reference_pressure.csv", s.grid, ref.pi_star));
    }
    if (opts.keep_states) {
      rec.r_star = ref.r_star;
      rec.pi_star = ref.pi_star;
    }
  }

  std::set<long> snap_steps;
  for (double t : cfg.snapshot_times) snap_steps.insert(std::lround(t / cfg.tau));

  auto make_row = [&](int k, const Coupling& rho, const Coupling* prev, const std::vector<double>* pi) {
    StepRow r;
    r.step = k;
    r.time = k * cfg.tau;
    r.energy = energy(rho, s.spec, s.grid, s.nu);
    r.wf_increment = prev ? fibered_w2(rho, *prev, s.grid, s.nu) : 0.0;
    r.delta_e = cfg.kappa > 0 ? (r.energy.total - rec.e_star) / rec.e_star
                              : std::numeric_limits<double>::quiet_NaN();
    bool positive = true;
    for (double v : rho.r) positive = positive && v > 0.0;
    if (positive || cfg.kappa == 0) {
      PressureField p = pi ? PressureField{*pi} : pressure_solve(rho, s.mu, s.grid, s.nu, s.spec);
      r.dissipation = dissipation(rho, p, s.grid, s.nu, s.spec);
    } else {
      r.dissipation = std::numeric_limits<double>::quiet_NaN();
    }
    return r;
  };
  auto snapshot = [&](int k, const Coupling& rho) {
    if (!snap_steps.count(k)) return;
    const double t = k * cfg.tau;
    rec.snapshot_times.push_back(t);
    if (!opts.write_files) return;
    const std::string label = time_label(t);
    const fs::path stem = dir / ("snapshot_" + label);
    for (auto& p : write_snapshot(stem, rho)) written.push_back(p);
    rec.snapshot_files.push_back(stem.filename().string() + ".json");
    const PressureField p = pressure_solve(rho, s.mu, s.grid, s.nu, s.spec);
    written.push_back(write_pressure_csv(dir / ("pressure_" + label + ".csv"), s.grid, p.pi));
    snaps.push_back({{"time", t}, {"file", rec.snapshot_files.back()}});
  };

  try {
    rec.rows.push_back(make_row(0, s.init, nullptr, nullptr));
    if (opts.progress) opts.progress(rec.rows.back());
    if (opts.keep_states) rec.states.push_back(s.init);
    snapshot(0, s.init);

    Coupling cur = s.init;
    DualState warm;
    for (int k = 1; k <= steps; ++k) {
      StepResult r = jko_step(cur, s.mu, s.nu, s.grid, s.spec, params, &warm);
      if (!r.converged) {
        rec.error = "step " + std::to_string(k) + ": " + r.message;
        break;
      }
      StepRow row = make_row(k, r.next, &cur, &r.pressure_dual);
      row.cp_iters = r.iterations;
      row.primal_residual = r.primal_residual;
      row.dual_residual = r.dual_residual;
      row.held = r.held;
      rec.rows.push_back(row);
      if (opts.progress) opts.progress(row);
      if (opts.keep_states) {
        rec.states.push_back(r.next);
        rec.step_pressures.push_back(r.pressure_dual);
      }
      cur = std::move(r.next);
      warm = std::move(r.duals);
      snapshot(k, cur);
    }
  } catch (const std::exception& e) {
    rec.error = e.what();
    write_manifest("error");
    throw;
  }
  rec.completed = rec.error.empty();
  write_manifest(rec.completed ? "ok" : "error");
  return rec;
}

RateFit fit_log_linear(const std::vector<double>& t, const std::vector<double>& values,
                       double plateau_guard, double cap) {
  if (t.size() != values.size()) throw ValidationError("fit: size mismatch");
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!(values[k] > plateau_guard)) break;
    if (values[k] > cap) continue;
    xs.push_back(t[k]);
    ys.push_back(std::log(values[k]));
  }
  if (xs.size() < 5)
    throw ValidationError("fit: need at least 5 pre-plateau points, have " + std::to_string(xs.size()));
  const double N = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k] / N;
    my += ys[k] / N;
  }
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  RateFit f;
  f.points = static_cast<int>(xs.size());
  f.slope = sxy / sxx;
  f.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

RateFit fit_convergence_rate(const TrajectoryRecord& rec, double plateau_guard, double cap) {
  std::vector<double> t, d;
  for (const auto& r : rec.rows) {
    t.push_back(r.time);
    d.push_back(r.delta_e);
  }
  return fit_log_linear(t, d, plateau_guard, cap);
}

namespace {

json read_manifest(const fs::path& dir) {
  std::ifstream f(dir / "manifest.json");
  if (!f) throw ValidationError("compare: no manifest.json in " + dir.string());
  try {
    json j;
    f >> j;
    return j;
  } catch (const json::exception& e) {
    throw ValidationError("compare: " + (dir / "manifest.json").string() + ": " + e.what());
  }
}

}  // namespace

Trajectory load_trajectory(const fs::path& dir) {
  const json man = read_manifest(dir);
  Trajectory t;
  try {
    const json& c = man.at("config");
    t.grid = Grid1D::make(c.at("m").get<int>());
    t.nu = build_equispaced_nu(c.at("n").get<int>());
    t.tau = c.at("tau").get<double>();
    for (const auto& s : man.at("snapshots")) {
      t.times.push_back(s.at("time").get<double>());
      t.states.push_back(read_snapshot(dir / s.at("file").get<std::string>()));
    }
  } catch (const json::exception& e) {
    throw ValidationError("compare: malformed manifest in " + dir.string() + ": " + e.what());
  }
  return t;
}

CompareReport compare_runs(const fs::path& dir_a, const fs::path& dir_b,
                           const std::vector<NamedZeta>& family, const fs::path& out_dir) {
  const json ca = read_manifest(dir_a).at("config"), cb = read_manifest(dir_b).at("config");
  std::string diff;
  for (const char* key : {"m", "tau"})
    if (ca.at(key) != cb.at(key))
      diff += std::string("\n  ") + key + ": " + ca.at(key).dump() + " vs " + cb.at(key).dump();
  if (!diff.empty()) throw ValidationError("compare: incompatible manifests:" + diff);

  const Trajectory a = load_trajectory(dir_a), b = load_trajectory(dir_b);
  std::vector<double> common;
  for (double t : a.times)
    for (double u : b.times)
      if (std::abs(t - u) <= 1e-9 * std::max(1.0, t)) common.push_back(t);
  if (common.empty()) throw ValidationError("compare: runs share no snapshot times");

  CompareReport rep;
  rep.table = stability_compare(a, b, family, common);
  fs::create_directories(out_dir);
  rep.csv = out_dir / "comparison.csv";
  std::ofstream f(rep.csv);
  f << "time,zeta,distance\n";
  char buf[128];
  for (std::size_t k = 0; k < common.size(); ++k)
    for (std::size_t z = 0; z < family.size(); ++z) {
      std::snprintf(buf, sizeof buf, "%.17g,%s,%.17g", common[k], family[z].name.c_str(),
                    rep.table.values[k][z]);
      f << buf << "\n";
    }
  return rep;
}

}  // namespace fwf
