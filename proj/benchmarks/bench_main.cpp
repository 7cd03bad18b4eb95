#include <benchmark/benchmark.h>

#include <random>

#include "fwf/diagnostics.hpp"
#include "fwf/functionals.hpp"
#include "fwf/jko.hpp"
#include "fwf/sinkhorn.hpp"

using namespace fwf;

namespace {

void BM_w2_1d(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const auto g = Grid1D::make(m);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.1, 1.0);
  std::vector<double> p(m), q(m);
  for (int i = 0; i < m; ++i) {
    p[i] = U(rng);
    q[i] = U(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(w2_1d(p, q, g));
  state.SetComplexityN(m);
}
BENCHMARK(BM_w2_1d)->RangeMultiplier(4)->Range(64, 4096)->Complexity();

void BM_prox_entropy(benchmark::State& state) {
  std::vector<double> v(4096), w(4096, 1.0 / 4096);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N(0.0, 1e-3);
  for (double& x : v) x = 1.0 / 4096 + N(rng);
  for (auto _ : state) benchmark::DoNotOptimize(cp_prox_entropy(v, 10.0, w, 0.01));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(v.size()));
}
BENCHMARK(BM_prox_entropy);

void BM_sinkhorn(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const auto g = Grid1D::make(m);
  const auto mu = build_uniform_mu(g);
  const auto nu = build_equispaced_nu(m);
  const auto spec = EnergySpec::quadratic(g, nu, 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(sinkhorn_minimize(mu, nu, g, spec).iterations);
}
BENCHMARK(BM_sinkhorn)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

// One step from the product coupling, the first step of the reference runs.
void BM_jko_step(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0)), n = static_cast<int>(state.range(1));
  const auto g = Grid1D::make(m);
  const auto mu = build_uniform_mu(g);
  const auto nu = build_equispaced_nu(n);
  const auto spec = EnergySpec::quadratic(g, nu, 0.01);
  StepParams p;
  p.tau = 0.25;
  p.kappa = 0.01;
  const auto prod = product_coupling(mu, nu);
  int iters = 0;
  for (auto _ : state) iters = jko_step(prod, mu, nu, g, spec, p).iterations;
  state.counters["cp_iters"] = iters;
}
BENCHMARK(BM_jko_step)->Args({32, 8})->Args({64, 16})->Args({64, 64})->Unit(benchmark::kMillisecond);

void BM_pressure_solve(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const auto g = Grid1D::make(m);
  const auto mu = build_bottleneck_mu(g, 0.125, 0.5);
  const auto nu = build_equispaced_nu(16);
  const auto spec = EnergySpec::quadratic(g, nu, 0.01);
  const auto rho = product_coupling(mu, nu);
  for (auto _ : state) benchmark::DoNotOptimize(pressure_solve(rho, mu, g, nu, spec).pi.data());
}
BENCHMARK(BM_pressure_solve)->Arg(256)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
