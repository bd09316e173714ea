#include <benchmark/benchmark.h>

#include <cstdint>
#include <string>
#include <vector>

#include "selfcons/binomial.hpp"
#include "selfcons/planner.hpp"
#include "selfcons/simulator.hpp"

using namespace selfcons;

namespace {

PromptDomain grid_domain(int count) {
  std::vector<PromptSpec> prompts;
  for (int i = 0; i < count; ++i) {
    const double p = 0.05 + 0.9 * i / (count > 1 ? count - 1 : 1);
    prompts.push_back(PromptSpec::binary("g" + std::to_string(i), p));
  }
  return PromptDomain(std::move(prompts));
}

void BM_LogFactorial(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  log_factorial(n);  // table build stays out of the timed loop
  for (auto _ : state) benchmark::DoNotOptimize(log_factorial(n));
}
BENCHMARK(BM_LogFactorial)->Arg(10)->Arg(1000)->Arg(1000000);

void BM_BinomPmfRow(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(binom_pmf_row(n, 0.37));
  state.SetComplexityN(n);
}
BENCHMARK(BM_BinomPmfRow)->RangeMultiplier(4)->Range(16, 16384)->Complexity(benchmark::oN);

void BM_BiasExact(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(bias_exact(n, 0.5));
  state.SetComplexityN(n);
}
BENCHMARK(BM_BiasExact)->RangeMultiplier(4)->Range(16, 16384)->Complexity(benchmark::oN);

void BM_ExhaustivePlan(benchmark::State& state) {
  const std::int64_t budget = state.range(0);
  for (auto _ : state) benchmark::DoNotOptimize(exhaustive_plan(budget));
  state.SetComplexityN(budget);
}
BENCHMARK(BM_ExhaustivePlan)->RangeMultiplier(10)->Range(100, 1000000)->Complexity(benchmark::oN);

void BM_RoundedPlan(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(rounded_plan(state.range(0)));
}
BENCHMARK(BM_RoundedPlan)->Arg(1000000);

void BM_RunExperiment(benchmark::State& state) {
  ExperimentConfig cfg{grid_domain(11)};
  cfg.m = 8;
  cfg.n = 16;
  cfg.replicates = state.range(0);
  cfg.seed = 7;
  cfg.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(run_experiment(cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RunExperiment)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_RunExperimentCorrelated(benchmark::State& state) {
  ExperimentConfig cfg{grid_domain(11)};
  cfg.m = 8;
  cfg.n = 16;
  cfg.replicates = 10000;
  cfg.rho = 0.5;
  cfg.seed = 7;
  cfg.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(run_experiment(cfg));
  state.SetItemsProcessed(state.iterations() * cfg.replicates);
}
BENCHMARK(BM_RunExperimentCorrelated)->Unit(benchmark::kMillisecond);

void BM_ExactMseOracle(benchmark::State& state) {
  const auto domain = grid_domain(3);
  const int m = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(exact_mse_oracle(domain, m, 4));
}
BENCHMARK(BM_ExactMseOracle)->DenseRange(1, 4)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
