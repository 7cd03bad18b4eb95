#include <cmath>
#include <random>

#include "doctest.h"
#include "fwf/diagnostics.hpp"
#include "fwf/functionals.hpp"
#include "fwf/jko.hpp"
#include "fwf/sinkhorn.hpp"
#include "oracle.hpp"

using namespace fwf;

namespace {

struct Small {
  Grid1D grid;
  MarginalX mu;
  SpeciesSet nu;
  EnergySpec spec;
};

Small make_small(int m, int n, double kappa) {
  Small s{Grid1D::make(m), {}, build_equispaced_nu(n), {}};
  s.mu = build_uniform_mu(s.grid);
  s.spec = EnergySpec::quadratic(s.grid, s.nu, kappa);
  return s;
}

MarginalX random_mu(const Grid1D& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.5, 1.5);
  MarginalX mu{std::vector<double>(g.m)};
  double s = 0;
  for (double& d : mu.density) {
    d = U(rng);
    s += d * g.dx;
  }
  for (double& d : mu.density) d /= s;
  return mu;
}

StepParams tight(double tau, double kappa) {
  StepParams p;
  p.tau = tau;
  p.kappa = kappa;
  p.tol = 1e-11;
  p.gap_tol = 1e-10;
  p.max_iters = 2000000;
  return p;
}

}  // namespace

TEST_CASE("entropy prox") {
  CHECK(cp_prox_entropy(2.0, 1.0, 1.0, 1.0) ==
        doctest::Approx(oracle::bisect_log_plus_linear(2.0)).epsilon(1e-11));
  for (double c : {-30.0, -3.0, 0.0, 0.5, 5.0, 40.0})
    CHECK(cp_prox_entropy(c, 1.0, 1.0, 1.0) ==
          doctest::Approx(oracle::bisect_log_plus_linear(c)).epsilon(1e-11));
  for (double w : {1e-6, 0.01, 3.0})
    for (double sigma : {0.1, 10.0, 1e4}) CHECK(cp_prox_entropy(w, sigma, w, 0.01) == doctest::Approx(w));

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(-5, 5);
  // Pick the root first so that it is representable, then solve for it.
  for (int k = 0; k < 200; ++k) {
    const double w = std::exp(U(rng)), sigma = std::exp(U(rng)), kappa = std::exp(U(rng));
    const double root = w * std::exp(4 * U(rng));
    const double v = root + kappa * std::log(root / w) / sigma;
    const double u = cp_prox_entropy(v, sigma, w, kappa);
    CHECK(u > 0);
    const double scale = kappa + sigma * (std::abs(v) + u);
    CHECK(std::abs(kappa * std::log(u / w) + sigma * (u - v)) <= 1e-11 * scale);
    CHECK(u == doctest::Approx(root).epsilon(1e-9));
  }
  CHECK(cp_prox_entropy(0.7, 1.0, 0.3, 1e-14) == doctest::Approx(0.7).epsilon(1e-9));

  const auto vec = cp_prox_entropy({2.0, 1.0}, 1.0, {1.0, 1.0}, 1.0);
  CHECK(vec[1] == doctest::Approx(1.0));
  CHECK_THROWS_AS(cp_prox_entropy({1.0}, 1.0, {1.0, 2.0}, 1.0), ValidationError);
}

TEST_CASE("operator norm of the stacked marginal maps") {
  // Dense case: K^T K is a sum of commuting Kronecker products of identities and
  // all-ones blocks, maximized on the constant vector with eigenvalue 2m + mn.
  CHECK(cp_operator_norm(1, 1, std::nullopt) == doctest::Approx(1.01 * std::sqrt(3.0)).epsilon(1e-6));
  CHECK(cp_operator_norm(2, 1, std::nullopt) == doctest::Approx(1.01 * std::sqrt(6.0)).epsilon(1e-6));
  CHECK(cp_operator_norm(3, 2, std::nullopt) == doctest::Approx(1.01 * std::sqrt(12.0)).epsilon(1e-4));
  double last = 0;
  for (int m : {4, 8, 16, 32}) {
    const double k = cp_operator_norm(m, 3, 2);
    CHECK(k >= last);
    last = k;
  }
  last = 0;
  for (int n : {1, 2, 4, 8}) {
    const double k = cp_operator_norm(16, n, 3);
    CHECK(k >= last);
    last = k;
  }
  CHECK_THROWS_AS(cp_operator_norm(0, 1, std::nullopt), ValidationError);
}

TEST_CASE("bandwidth resolution") {
  CHECK(resolve_bandwidth(1, std::nullopt) == 0);
  CHECK(resolve_bandwidth(64, std::nullopt) == 63);
  CHECK(resolve_bandwidth(256, std::nullopt) == 128);
  CHECK(resolve_bandwidth(256, 32) == 32);
  CHECK(resolve_bandwidth(10, 50) == 9);
  CHECK_THROWS_AS(resolve_bandwidth(10, 0), ValidationError);
}

TEST_CASE("step matches the projected-gradient oracle") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 3; ++trial) {
    auto s = make_small(3, 2, 0.0);
    s.mu = random_mu(s.grid, rng);
    const double kappa = trial == 2 ? 0.0 : 0.05;
    s.spec = EnergySpec::quadratic(s.grid, s.nu, kappa);
    const auto prev = oracle::random_feasible(s.mu, s.nu, s.grid, rng);
    const auto p = tight(0.25, kappa);
    const auto r = jko_step(prev, s.mu, s.nu, s.grid, s.spec, p);
    const auto o = oracle::projected_gradient_step(prev, s.mu, s.nu, s.grid, s.spec, 0.25, kappa);
    CHECK(o.stationarity <= 1e-8);
    CHECK(r.converged);
    CHECK(r.objective == doctest::Approx(o.objective).epsilon(1e-6));
  }
}

TEST_CASE("step output invariants") {
  std::mt19937_64 rng(77);
  auto s = make_small(12, 3, 0.02);
  s.mu = random_mu(s.grid, rng);
  const auto prev = oracle::random_feasible(s.mu, s.nu, s.grid, rng, 3.0);
  StepParams p;
  p.tau = 0.1;
  p.kappa = 0.02;
  const auto r = jko_step(prev, s.mu, s.nu, s.grid, s.spec, p);
  REQUIRE(r.converged);
  CHECK(marginal_residual(r.next, s.mu, s.nu, s.grid).max() <= 1e-6);
  for (double v : r.next.r) CHECK(v > 0.0);
  const double wf = fibered_w2(r.next, prev, s.grid, s.nu);
  const double e0 = energy(prev, s.spec, s.grid, s.nu).total;
  const double e1 = energy(r.next, s.spec, s.grid, s.nu).total;
  CHECK(e1 <= e0 - wf * wf / (2 * p.tau) + p.tol);
  CHECK(r.objective == doctest::Approx(jko_functional(r.next, prev, s.spec, s.grid, s.nu, p.tau)));

  double mean = 0;
  for (int i = 0; i < s.grid.m; ++i) mean += r.pressure_dual[i] * s.mu.density[i] * s.grid.dx;
  CHECK(std::abs(mean) <= 1e-12);

  // The plan moves prev's mass within each species.
  for (int j = 0; j < 3; ++j)
    for (int ip = 0; ip < 12; ++ip) {
      double c = 0;
      for (int i = 0; i < 12; ++i) c += r.plan.at(i, ip, j);
      CHECK(c == doctest::Approx(prev(ip, j) * s.grid.dx * s.nu.mass[j]).epsilon(1e-6));
    }
  CHECK(r.duals.a.size() == 36);
  CHECK(r.duals.b.size() == 12);
}

TEST_CASE("plain and split schemes agree") {
  auto s = make_small(6, 2, 0.05);
  const auto prev = flipped_coupling(s.grid, s.mu, s.nu);
  auto p = tight(0.25, 0.05);
  p.tol = 1e-9;
  p.gap_tol = 1e-8;
  const auto a = jko_step(prev, s.mu, s.nu, s.grid, s.spec, p);
  p.scheme = Scheme::plain;
  const auto b = jko_step(prev, s.mu, s.nu, s.grid, s.spec, p);
  CHECK(a.converged);
  CHECK(b.converged);
  CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-6));
  CHECK(l1_mass(a.next, b.next, s.grid, s.nu) <= 1e-4);
}

TEST_CASE("minimizer is a fixed point") {
  auto s = make_small(16, 4, 0.05);
  const auto ref = sinkhorn_minimize(s.mu, s.nu, s.grid, s.spec);
  REQUIRE(ref.converged);
  StepParams p;
  p.tau = 0.25;
  p.kappa = 0.05;
  const auto r = jko_step(ref.r_star, s.mu, s.nu, s.grid, s.spec, p);
  CHECK(l1_mass(r.next, ref.r_star, s.grid, s.nu) <= 1e-5);
}

TEST_CASE("kappa = 0 Monge couplings stay put") {
  for (int m : {16, 32, 64}) {
    auto s = make_small(m, m, 0.0);
    const auto sc = flipped_stationarity_case(s.grid, s.mu, s.nu);
    StepParams p;
    p.tau = 0.25;
    p.kappa = 0.0;
    const auto r = jko_step(sc.monge_coupling, s.mu, s.nu, s.grid, s.spec, p);
    CHECK(r.converged);
    CHECK(marginal_residual(r.next, s.mu, s.nu, s.grid).max() <= 1e-12);
    CHECK(l1_mass(r.next, sc.monge_coupling, s.grid, s.nu) <= 1e-6);
    for (double v : r.next.r) CHECK(v >= 0.0);
  }
}

TEST_CASE("warm start reaches the same step") {
  auto s = make_small(16, 2, 0.02);
  const auto prev = product_coupling(s.mu, s.nu);
  StepParams p;
  p.tau = 0.25;
  p.kappa = 0.02;
  const auto first = jko_step(prev, s.mu, s.nu, s.grid, s.spec, p);
  const auto cold = jko_step(first.next, s.mu, s.nu, s.grid, s.spec, p);
  const auto warm = jko_step(first.next, s.mu, s.nu, s.grid, s.spec, p, &first.duals);
  CHECK(warm.objective == doctest::Approx(cold.objective).epsilon(1e-5));
  DualState wrong{{1.0, 2.0}, {3.0}};
  const auto ignored = jko_step(first.next, s.mu, s.nu, s.grid, s.spec, p, &wrong);
  CHECK(ignored.iterations == cold.iterations);
}

TEST_CASE("step rejections and flags") {
  auto s = make_small(8, 2, 0.01);
  const auto prev = product_coupling(s.mu, s.nu);
  StepParams p;
  p.tau = 0.25;
  p.kappa = 0.01;
  SUBCASE("parameters") {
    auto q = p;
    q.tau = 0;
    CHECK_THROWS_AS(jko_step(prev, s.mu, s.nu, s.grid, s.spec, q), ValidationError);
    q = p;
    q.tol = 0;
    CHECK_THROWS_AS(jko_step(prev, s.mu, s.nu, s.grid, s.spec, q), ValidationError);
    q = p;
    q.theta = 1.5;
    CHECK_THROWS_AS(jko_step(prev, s.mu, s.nu, s.grid, s.spec, q), ValidationError);
    q = p;
    q.bandwidth = 0;
    CHECK_THROWS_AS(jko_step(prev, s.mu, s.nu, s.grid, s.spec, q), ValidationError);
  }
  SUBCASE("infeasible prev") {
    auto bad = prev;
    bad(0, 0) = 1.5;
    CHECK_THROWS_AS(jko_step(bad, s.mu, s.nu, s.grid, s.spec, p), ValidationError);
  }
  SUBCASE("iteration budget") {
    auto q = p;
    q.max_iters = 5;
    const auto f = flipped_coupling(s.grid, s.mu, s.nu);
    const auto r = jko_step(f, s.mu, s.nu, s.grid, s.spec, q);
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 5);
    CHECK(r.message.find("no convergence") != std::string::npos);
  }
  SUBCASE("band too narrow") {
    auto w = make_small(32, 2, 0.01);
    auto q = p;
    q.bandwidth = 1;
    const auto f = flipped_coupling(w.grid, w.mu, w.nu);
    const auto r = jko_step(f, w.mu, w.nu, w.grid, w.spec, q);
    CHECK(r.band_limited);
    CHECK_FALSE(r.converged);
    CHECK(r.message.find("widen") != std::string::npos);
  }
}

TEST_CASE("flow") {
  auto s = make_small(16, 4, 0.01);
  StepParams p;
  p.tau = 0.25;
  p.kappa = 0.01;
  const auto init = flipped_coupling(s.grid, s.mu, s.nu);
  CHECK_THROWS_AS(run_flow(init, 0, s.mu, s.nu, s.grid, s.spec, p), ValidationError);

  int calls = 0;
  const auto flow = run_flow(init, 6, s.mu, s.nu, s.grid, s.spec, p,
                             [&](int k, const StepResult&) { CHECK(k == ++calls); });
  CHECK(calls == 6);
  REQUIRE(flow.steps.size() == 6);
  CHECK_FALSE(flow.aborted);
  CHECK(flow.steps[0].plan.g.empty());

  const double e0 = energy(init, s.spec, s.grid, s.nu).total;
  double last = e0;
  for (size_t k = 0; k < flow.steps.size(); ++k) {
    const double e = energy(flow.steps[k].next, s.spec, s.grid, s.nu).total;
    CHECK(e <= last + 1e-8);
    last = e;
    // equicontinuity against the initial state
    const double wf = fibered_w2(flow.steps[k].next, init, s.grid, s.nu);
    CHECK(wf <= std::sqrt(2 * e0 * p.tau * (k + 1)) * (1 + 1e-6));
  }

  auto q = p;
  q.max_iters = 10;
  const auto short_flow = run_flow(init, 3, s.mu, s.nu, s.grid, s.spec, q);
  CHECK(short_flow.aborted);
  CHECK(short_flow.steps.size() == 1);
  CHECK(short_flow.message.rfind("step 1:", 0) == 0);
}
