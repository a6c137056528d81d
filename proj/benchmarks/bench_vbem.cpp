#include <benchmark/benchmark.h>

#include "ilr/ilr.hpp"

namespace {

using namespace ilr;

MixturePosterior sinc_model(int n, int k_max) {
  FitConfig c;
  c.restarts = 1;
  c.max_iters = 30;
  return fit(gen_sinc_hetero(n, 0), default_hyperparams(1, 2, 1, k_max, 1.0), c);
}

// One E-step over N points; expected O(N K).
void BM_EStep(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  const auto k = static_cast<int>(state.range(1));
  const auto model = sinc_model(2000, k);
  const auto data = gen_sinc_hetero(n, 1);
  const auto design = Design::build(data, model.feature_map, model.standardizer);
  for (auto _ : state) {
    benchmark::DoNotOptimize(e_step(model, design.gate, design.features, design.targets));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_EStep)->ArgsProduct({{1000, 4000, 16000}, {10, 50}})->Unit(benchmark::kMillisecond);

void BM_MStep(benchmark::State& state) {
  const auto k = static_cast<int>(state.range(0));
  const auto model = sinc_model(2000, k);
  const auto data = gen_twolink_arm(4000, 0);
  const auto h = default_hyperparams(6, 7, 2, k, 1.0);
  FitConfig c;
  c.restarts = 1;
  c.max_iters = 5;
  const auto arm = fit(data, h, c);
  const auto design = Design::build(data, arm.feature_map, arm.standardizer);
  const auto resp = e_step(arm, design.gate, design.features, design.targets);
  const auto stats = accumulate_stats(design.gate, design.features, design.targets, resp);
  for (auto _ : state) benchmark::DoNotOptimize(m_step(stats, h));
}
BENCHMARK(BM_MStep)->Arg(10)->Arg(60)->Unit(benchmark::kMillisecond);

// Full fit, single restart, fixed iteration count.
void BM_FitScaling(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  const auto data = gen_sinc_hetero(n, 0);
  const auto h = default_hyperparams(1, 2, 1, 30, 1.0);
  FitConfig c;
  c.restarts = 1;
  c.max_iters = 20;
  c.elbo_rel_tol = 1e-300;
  for (auto _ : state) benchmark::DoNotOptimize(fit(data, h, c));
  state.SetComplexityN(n);
}
BENCHMARK(BM_FitScaling)->RangeMultiplier(2)->Range(500, 8000)->Complexity(benchmark::oN)
    ->Unit(benchmark::kMillisecond);

// Stochastic updates: cost per step grows with the minibatch size M only.
void BM_MinibatchStep(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto data = gen_sinc_hetero(16000, 0);
  const auto h = default_hyperparams(1, 2, 1, 30, 1.0);
  FitConfig c;
  c.restarts = 1;
  c.minibatch = m;
  c.max_iters = 20;
  c.init = InitKind::random;
  for (auto _ : state) benchmark::DoNotOptimize(fit_minibatch(data, h, c));
  state.SetComplexityN(static_cast<benchmark::IterationCount>(m));
}
BENCHMARK(BM_MinibatchStep)->RangeMultiplier(2)->Range(256, 4096)->Unit(benchmark::kMillisecond);

}  // namespace
