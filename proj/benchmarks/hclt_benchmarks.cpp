#include <hclt/conditions.hpp>
#include <hclt/imputation.hpp>
#include <hclt/l2.hpp>
#include <hclt/missingness.hpp>
#include <hclt/normality.hpp>
#include <hclt/triangular_array.hpp>

#include <benchmark/benchmark.h>

namespace {

using namespace hclt;

void BM_SampleElement(benchmark::State& state) {
  const auto grid = Grid::uniform(256);
  const auto spec = presets::lf_pass(grid, static_cast<std::size_t>(state.range(0)));
  std::uint64_t rep = 0;
  for (auto _ : state) {
    auto s = sample_element(spec, 64, 3, Seed(1).derive(rep++));
    benchmark::DoNotOptimize(s.element.values().data());
  }
}
BENCHMARK(BM_SampleElement)->Arg(2)->Arg(8)->Arg(32);

void BM_Pairing(benchmark::State& state) {
  const auto grid = Grid::uniform(static_cast<std::size_t>(state.range(0)));
  const auto k = Kernel::from(grid, [](double x, double y) { return std::min(x, y); });
  const auto g = GridFunction::constant(grid, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(pairing(k, g));
}
BENCHMARK(BM_Pairing)->Arg(256)->Arg(512);

void BM_LindebergRow(benchmark::State& state) {
  const auto grid = Grid::uniform(256);
  const auto spec = presets::lf_pass(grid);
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(lindeberg_functional(spec, n, 0.5, 100, Seed(2), 1).estimate);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n) * 100);
}
BENCHMARK(BM_LindebergRow)->Arg(64)->Arg(1024);

void BM_KernelConditioning(benchmark::State& state) {
  const auto grid = Grid::uniform(static_cast<std::size_t>(state.range(0)));
  const auto spec = presets::gauss_j2(grid);
  const Kernel prior = analytic_covariance(spec, 1, 1);
  const GaussianConditioner conditioner(prior);
  const auto element = sample_element(spec, 1, 1, Seed(3)).element;
  const auto pattern = Mechanism::mcar_bernoulli(grid, 0.5).sample(element, Seed(4));
  const auto parts = split(element, pattern);
  for (auto _ : state) benchmark::DoNotOptimize(conditioner.condition(pattern, parts.observed_values).mean_missing.data());
}
BENCHMARK(BM_KernelConditioning)->Arg(64)->Arg(256);

void BM_FactorImputation(benchmark::State& state) {
  const auto grid = Grid::uniform(256);
  const auto spec = presets::gauss_j2(grid);
  const PartialSampler sampler(spec, Mechanism::mcar_bernoulli(grid, 0.5));
  Eigen::VectorXd out;
  std::uint64_t rep = 0;
  for (auto _ : state) {
    sampler.draw(16, 1, Seed(5).derive(rep++), out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_FactorImputation);

void BM_CltVerify(benchmark::State& state) {
  const auto grid = Grid::uniform(256);
  const auto spec = presets::lf_pass(grid);
  const auto sigma = presets::limit_covariance(spec);
  const auto tests = standard_test_functions(grid);
  const std::size_t ns[] = {static_cast<std::size_t>(state.range(0))};
  ks_null_quantile(1000);
  for (auto _ : state) benchmark::DoNotOptimize(clt_verify(spec, sigma, ns, tests, 1000, Seed(6), 1).size());
}
BENCHMARK(BM_CltVerify)->Arg(64)->Arg(1024)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
