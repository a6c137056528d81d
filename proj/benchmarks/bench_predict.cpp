#include <random>

#include <benchmark/benchmark.h>

#include "ilr/ilr.hpp"

namespace {

using namespace ilr;

MatrixXd gaussian_queries(int n, int dim) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  MatrixXd q(n, dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) q(i, j) = g(rng);
  return q;
}

// Arm model fit on N training points; per-query cost should not move with N.
void BM_PredictVsTrainingSize(benchmark::State& state) {
  FitConfig c;
  c.restarts = 1;
  c.max_iters = 30;
  const auto model = fit(gen_twolink_arm(static_cast<int>(state.range(0)), 0),
                         default_hyperparams(6, 7, 2, 12, 1.0), c);
  const Predictor p(model);
  const MatrixXd q = gen_twolink_arm(1000, 9).inputs;
  Eigen::Index i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(p.predict(q.row(i).transpose()));
    i = (i + 1) % q.rows();
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_PredictVsTrainingSize)->Arg(2000)->Arg(4000)->Arg(8000);

// K components, d = 4 outputs, m_x = 12 inputs.
void BM_PredictVsComponents(benchmark::State& state) {
  const auto k = static_cast<int>(state.range(0));
  const auto h = default_hyperparams(12, 13, 4, k, 1.0);
  Dataset data;
  data.inputs = gaussian_queries(2000, 12);
  data.targets = data.inputs.leftCols(4) * 0.5;
  data.targets += gaussian_queries(2000, 4) * 0.1;
  FitConfig c;
  c.restarts = 1;
  c.max_iters = 20;
  const auto model = fit(data, h, c);
  const Predictor p(model);
  const MatrixXd q = gaussian_queries(1000, 12);
  Eigen::Index i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(p.predict(q.row(i).transpose()));
    i = (i + 1) % q.rows();
  }
  state.SetItemsProcessed(state.iterations());
  state.SetComplexityN(k);
}
BENCHMARK(BM_PredictVsComponents)->Arg(3)->Arg(6)->Arg(12)->Arg(24)->Arg(48)
    ->Complexity(benchmark::oN);

}  // namespace
