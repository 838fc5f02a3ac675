// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <vector>

#include "bootdiag/diagnostics.hpp"
#include "bootdiag/discrepancy.hpp"
#include "bootdiag/models.hpp"
#include "bootdiag/probkernel.hpp"

namespace {

using namespace bootdiag;

void BM_normal_draws(benchmark::State& state) {
  const Stream s(SeedSpec{1, {1}});
  std::uint64_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(std_normal_at(s, i++));
  }
}
BENCHMARK(BM_normal_draws);

void BM_ks_distance(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const SortedSample sample(sample_std_normal(SeedSpec{2, {1}}, m));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ks_distance(sample).value);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ks_distance)->Arg(20)->Arg(200)->Arg(2000)->Complexity();

void BM_iv_draw(benchmark::State& state) {
  IvSpec spec;
  spec.n = static_cast<std::size_t>(state.range(0));
  const FittedModel fitted = simulate(ScenarioSpec{spec}, SeedSpec{3, {0, 0}});
  const ModelDrawStream stream(fitted, SeedSpec{3, {0, 0, 1}});
  std::uint64_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(stream.draw_at(i++));
  }
}
BENCHMARK(BM_iv_draw)->Arg(200)->Arg(1000);

void BM_run_test_ks(benchmark::State& state) {
  BoundarySpec spec;
  const FittedModel fitted = simulate(ScenarioSpec{spec}, SeedSpec{4, {0, 0}});
  DiagnosticConfig config;
  config.m = static_cast<std::size_t>(state.range(0));
  std::uint64_t k = 0;
  for (auto _ : state) {
    const ModelDrawStream stream(fitted, SeedSpec{4, {0, 0, 1, k++}});
    benchmark::DoNotOptimize(run_test(stream, config).p_value.value());
  }
}
BENCHMARK(BM_run_test_ks)->Arg(20)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
