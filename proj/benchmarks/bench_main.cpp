#include <benchmark/benchmark.h>

#include "steinflow/meanfield.hpp"
#include "steinflow/metrics.hpp"
#include "steinflow/particles.hpp"

using namespace steinflow;

namespace {

const Kernel k2(KernelFamily::gaussian, 2.0, 1);
const Potential quad = Potential::quadratic(Eigen::MatrixXd::Identity(1, 1));

void BM_SvgdVelocity(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto s = quantile_initialization(Distribution1D::normal(2.0, 1.0), n);
  std::vector<double> out;
  for (auto _ : state) {
    svgd_velocity(s, k2, quad, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SvgdVelocity)->RangeMultiplier(4)->Range(64, 4096)->Complexity(benchmark::oNSquared);

void BM_FvStep(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto law = Distribution1D::normal(2.0, 1.0);
  const auto rho = sample_density(10.0, m, [&](double x) { return law.pdf(x); });
  for (auto _ : state) benchmark::DoNotOptimize(fv_step(rho, k2, quad, 1e-3));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FvStep)->Arg(250)->Arg(500)->Arg(1000)->Arg(2000)->Arg(4000)->Complexity();

void BM_Ksd(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto mu = EmpiricalMeasure::uniform(quantile_points(Distribution1D::normal(1.0, 1.0), n));
  for (auto _ : state) benchmark::DoNotOptimize(ksd(mu, k2, quad));
}
BENCHMARK(BM_Ksd)->RangeMultiplier(4)->Range(64, 4096);

void BM_Wasserstein(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto law = Distribution1D::normal(0.0, 1.0);
  const auto mu = EmpiricalMeasure::uniform(quantile_points(law, n));
  const auto rho = sample_density(10.0, 2000, [&](double x) { return law.pdf(x); });
  for (auto _ : state) benchmark::DoNotOptimize(wasserstein_1d(mu, rho));
}
BENCHMARK(BM_Wasserstein)->RangeMultiplier(8)->Range(64, 32768);

void BM_CharacteristicStep(benchmark::State& state) {
  const auto nu = make_quadrature_ensemble(Distribution1D::normal(2.0, 1.0), static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(characteristic_solve(nu, k2, quad, 1e-2, {.dt = 1e-2}));
}
BENCHMARK(BM_CharacteristicStep)->RangeMultiplier(4)->Range(100, 1600);

}  // namespace
BENCHMARK_MAIN();
