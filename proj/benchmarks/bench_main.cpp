#include <benchmark/benchmark.h>

#include <cmath>

#include "deepsvm/autodiff.hpp"
#include "deepsvm/oracle.hpp"
#include "deepsvm/parallel.hpp"
#include "deepsvm/sampling.hpp"

namespace {

using namespace deepsvm;

const HestonParams kParams{2.0, 0.04, 0.3, -0.7, 0.03};

void BM_OraclePrice(benchmark::State& state) {
  double x = -0.5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(oracle::price_call(kParams, x, 0.04, 0.5));
    x = x > 0.5 ? -0.5 : x + 0.01;
  }
}
BENCHMARK(BM_OraclePrice);

void BM_OracleGreeks(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(oracle::delta_oracle(kParams, 0.1, 0.04, 0.5));
    benchmark::DoNotOptimize(oracle::gamma_oracle(kParams, 0.1, 0.04, 0.5));
  }
}
BENCHMARK(BM_OracleGreeks);

void BM_SobolInterior(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    Sampler sampler(1);
    benchmark::DoNotOptimize(sampler.interior(n));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SobolInterior)->Arg(1 << 12);

void BM_ForwardJets(benchmark::State& state) {
  set_thread_count(1);
  const auto model = init_model(ModelSpec{}, 1);
  const auto points = Sampler(2).interior(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(forward_jets(model, points));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardJets)->Arg(256)->Arg(2048);

void BM_LossAndGradient(benchmark::State& state) {
  set_thread_count(1);
  const auto model = init_model(ModelSpec{}, 1);
  Sampler sampler(3);
  const auto interior = sampler.interior(static_cast<std::size_t>(state.range(0)));
  const auto atm = sampler.atm(256);
  const auto boundary = sampler.boundary(256);
  const LossBatch batch{interior, atm, boundary};
  for (auto _ : state) benchmark::DoNotOptimize(backward_params(model, batch));
  state.SetItemsProcessed(state.iterations() * (state.range(0) + 512));
}
BENCHMARK(BM_LossAndGradient)->Arg(2048)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
