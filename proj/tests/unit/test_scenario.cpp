#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fwf/io.hpp"
#include "fwf/scenario.hpp"
#include "json.hpp"

using namespace fwf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fwf_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string small_config(int m, int n, double kappa, const std::string& init, const fs::path& out,
                         double t_end = 0.5) {
  nlohmann::json j = {{"m", m},         {"n", n},          {"kappa", kappa},
                      {"tau", 0.25},    {"t_end", t_end},  {"init", {{"kind", init}}},
                      {"output_dir", out.string()}};
  return j.dump();
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream f(p);
  return nlohmann::json::parse(f);
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse_run_config(R"({"m": 8, "n": 2, "kappa": 0.01, "tau": 0.25, "t_end": 10})");
  CHECK(c.m == 8);
  CHECK(c.solver.tau == 0.25);
  CHECK(step_count(c) == 40);
  CHECK(c.snapshot_times == std::vector<double>{0, 1, 2.5, 5, 10});
  const auto back = parse_run_config(run_config_to_json(c));
  CHECK(run_config_to_json(back) == run_config_to_json(c));

  const auto short_run = parse_run_config(R"({"m": 8, "n": 2, "kappa": 0.01, "tau": 0.25, "t_end": 1.5})");
  CHECK(short_run.snapshot_times == std::vector<double>{0, 1, 1.5});

  auto bad = [](const char* text) { CHECK_THROWS_AS(parse_run_config(text), ValidationError); };
  bad("{");
  bad("[]");
  bad(R"({"m": 8, "n": 2, "kappa": 0.01, "tau": 0.25})");
  bad(R"({"m": 8, "n": 2, "kappa": 0.01, "tau": 0.25, "t_end": 1, "colour": 1})");
  bad(R"({"m": 8, "n": 2, "kappa": 0.01, "tau": 0.3, "t_end": 1})");
  bad(R"({"m": 0, "n": 2, "kappa": 0.01, "tau": 0.25, "t_end": 1})");
  bad(R"({"m": 8, "n": 2, "kappa": -1, "tau": 0.25, "t_end": 1})");
  bad(R"({"m": 8, "n": 2, "kappa": 0.01, "tau": 0.25, "t_end": 1, "snapshot_times": [0.1]})");
  bad(R"({"m": 8, "n": 2, "kappa": 0.01, "tau": 0.25, "t_end": 1, "solver": {"scheme": "fast"}})");
  bad(R"({"m": 8, "n": 2, "kappa": 0.01, "tau": 0.25, "t_end": 1, "solver": {"tol": 0}})");
  bad(R"({"m": 8, "n": 2, "kappa": 0.01, "tau": 0.25, "t_end": 1, "solver": {"bandwidth": 0}})");
  bad(R"({"m": 8, "n": 2, "kappa": 0.01, "tau": 0.25, "t_end": 1, "init": {"kind": "file"}})");
  bad(R"({"m": "eight", "n": 2, "kappa": 0.01, "tau": 0.25, "t_end": 1})");
  CHECK_THROWS_AS(load_run_config("/nonexistent/config.json"), ValidationError);
}

TEST_CASE("run writes a complete, checksummed directory") {
  const fs::path dir = scratch("run");
  const auto cfg = parse_run_config(small_config(8, 2, 0.05, "flipped", dir));
  RunOptions opts;
  int seen = 0;
  opts.progress = [&](const StepRow&) { ++seen; };
  opts.keep_states = true;
  const auto rec = run(cfg, opts);
  REQUIRE(rec.completed);
  CHECK(seen == 3);
  CHECK(rec.rows.size() == 3);
  CHECK(rec.states.size() == 3);
  CHECK(rec.step_pressures.size() == 2);
  CHECK(rec.rows[2].energy.total <= rec.rows[1].energy.total);
  CHECK(rec.rows[0].delta_e > rec.rows[2].delta_e);

  const auto man = read_json(dir / "manifest.json");
  CHECK(man["status"] == "ok");
  CHECK(man["config"]["m"] == 8);
  CHECK(man["snapshots"].size() == 2);
  for (auto it = man["checksums"].begin(); it != man["checksums"].end(); ++it)
    CHECK(it.value().get<std::string>() == "fnv1a64:" + hex64(fnv1a_file(dir / it.key())));
  for (const char* f : {"diagnostics.csv", "reference.json", "reference.bin", "reference_pressure.csv",
                        "snapshot_0.json", "snapshot_0.bin", "snapshot_0.5.json", "pressure_0.5.csv"})
    CHECK_MESSAGE(fs::exists(dir / f), f);

  std::ifstream csv(dir / "diagnostics.csv");
  std::string line;
  int lines = 0;
  while (std::getline(csv, line)) ++lines;
  CHECK(lines == 4);

  const auto traj = load_trajectory(dir);
  REQUIRE(traj.states.size() == 2);
  CHECK(traj.times[1] == 0.5);
  for (size_t k = 0; k < traj.states[1].r.size(); ++k) CHECK(traj.states[1].r[k] == rec.states[2].r[k]);
}

TEST_CASE("file initialization and kappa = 0") {
  const fs::path dir = scratch("chain");
  const auto first = parse_run_config(small_config(8, 2, 0.05, "product", dir / "a", 0.25));
  REQUIRE(run(first).completed);
  nlohmann::json j = nlohmann::json::parse(small_config(8, 2, 0.05, "file", dir / "b", 0.25));
  j["init"]["path"] = "a/snapshot_0.25.json";
  std::ofstream(dir / "cfg.json") << j.dump();
  const auto second = load_run_config(dir / "cfg.json");
  CHECK(second.init.path == (dir / "a/snapshot_0.25.json").string());
  RunOptions keep;
  keep.keep_states = true;
  keep.write_files = false;
  CHECK(run(second, keep).completed);

  j["m"] = 4;
  CHECK_THROWS_AS(build_setup(parse_run_config(j.dump(), dir)), ValidationError);

  const auto cold = parse_run_config(small_config(8, 2, 0.0, "product", dir / "c", 0.25));
  const auto rec = run(cold, keep);
  REQUIRE(rec.completed);
  CHECK(std::isnan(rec.rows[1].delta_e));
}

TEST_CASE("comparison of two runs") {
  const fs::path dir = scratch("compare");
  REQUIRE(run(parse_run_config(small_config(8, 2, 0.05, "product", dir / "n2"))).completed);
  REQUIRE(run(parse_run_config(small_config(8, 4, 0.05, "product", dir / "n4"))).completed);
  const auto rep = compare_runs(dir / "n2", dir / "n4", standard_zeta_family(), dir / "out");
  CHECK(fs::exists(rep.csv));
  CHECK(rep.table.times == std::vector<double>{0, 0.5});
  for (const auto& row : rep.table.values) CHECK(row[0] <= 1e-9);

  REQUIRE(run(parse_run_config(small_config(4, 2, 0.05, "product", dir / "m4"))).completed);
  CHECK_THROWS_AS(compare_runs(dir / "n2", dir / "m4", standard_zeta_family(), dir / "out"),
                  ValidationError);
  CHECK_THROWS_AS(compare_runs(dir / "n2", dir / "missing", standard_zeta_family(), dir / "out"),
                  ValidationError);
}

TEST_CASE("log-linear rate fit") {
  std::vector<double> t, v;
  for (int k = 0; k < 12; ++k) {
    t.push_back(0.25 * k);
    v.push_back(k < 9 ? 3.0 * std::exp(-1.7 * t.back()) : 1e-9);
  }
  const auto f = fit_log_linear(t, v, 1e-6);
  CHECK(f.points == 9);
  CHECK(f.slope == doctest::Approx(-1.7));
  CHECK(f.r2 == doctest::Approx(1.0));

  v[0] = 50;
  v[1] = 40;
  const auto capped = fit_log_linear(t, v, 1e-6, 10.0);
  CHECK(capped.points == 7);
  CHECK(capped.slope == doctest::Approx(-1.7));

  CHECK_THROWS_AS(fit_log_linear(t, v, 1.0), ValidationError);
  CHECK_THROWS_AS(fit_log_linear({0, 1}, {1}, 0.1), ValidationError);
}

TEST_CASE("shipped configurations parse") {
  int count = 0;
  for (const auto& e : fs::directory_iterator(FWF_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    CHECK_NOTHROW(load_run_config(e.path()));
    ++count;
  }
  CHECK(count >= 10);
}
