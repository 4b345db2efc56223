#include <vector>

#include <benchmark/benchmark.h>

#include "gradtd/estimators.hpp"
#include "gradtd/oracles.hpp"

using namespace gradtd;

namespace {

Model make_model(int kind) {
  ModelSpec s;
  s.kind = static_cast<ModelKind>(kind);
  return Model(s);
}

/// Pre-simulated transitions so the loop measures the estimator update alone.
std::vector<Transition> record(const Model& m, long n) {
  Trajectory path(m, default_features(m), RandomStream(1, 0));
  path.advance(1000);
  std::vector<Transition> out;
  out.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) out.push_back(path.next());
  return out;
}

void BM_Update(benchmark::State& state) {
  const auto alg = static_cast<Algorithm>(state.range(0));
  const Model m = make_model(static_cast<int>(state.range(1)));
  const double beta = is_average_cost(alg) || m.is_queue() ? 1.0 : 0.9;
  const auto data = record(m, 4096);
  auto est = make_estimator(EstimatorOptions{alg, beta, 0.5, 1e-3, {}}, m, default_features(m));
  std::size_t i = 0;
  for (auto _ : state) {
    update(est, data[i++ & 4095]);
    benchmark::DoNotOptimize(est.b.data());
  }
  state.SetItemsProcessed(state.iterations());
  state.SetLabel(std::string(to_string(alg)) + "/" + std::string(to_string(m.kind())));
}

void BM_Simulate(benchmark::State& state) {
  const Model m = make_model(static_cast<int>(state.range(0)));
  Trajectory path(m, default_features(m), RandomStream(2, 0));
  for (auto _ : state) benchmark::DoNotOptimize(path.next().c);
  state.SetItemsProcessed(state.iterations());
  state.SetLabel(std::string(to_string(m.kind())));
}

void BM_Finalize(benchmark::State& state) {
  const Model m = make_model(0);
  auto est = make_estimator(EstimatorOptions{Algorithm::lstd, 0.9, 1.0, 1e-3, {}}, m, default_features(m));
  for (const auto& tr : record(m, 100)) update(est, tr);
  for (auto _ : state) benchmark::DoNotOptimize(finalize(est).theta.data());
}

void BM_BellmanCurve(benchmark::State& state) {
  const Model m = make_model(2);
  const auto grid = oracle::lattice_grid(m, 20.0);
  Vector theta(2);
  theta << 1.44, 0.09;
  for (auto _ : state) {
    benchmark::DoNotOptimize(oracle::bellman_error(m, FeatureMap::speed_scaling(), theta, 2.0, grid).values.data());
  }
}

}  // namespace

BENCHMARK(BM_Update)
    ->Args({static_cast<int>(Algorithm::lstd), 0})
    ->Args({static_cast<int>(Algorithm::grad_lstd), 0})
    ->Args({static_cast<int>(Algorithm::lstd_lambda), 0})
    ->Args({static_cast<int>(Algorithm::grad_lstd_lambda), 0})
    ->Args({static_cast<int>(Algorithm::grad_lstd), 1})
    ->Args({static_cast<int>(Algorithm::lstd_lambda_avg), 1})
    ->Args({static_cast<int>(Algorithm::regen_lstd), 2});
BENCHMARK(BM_Simulate)->Arg(0)->Arg(1)->Arg(2);
BENCHMARK(BM_Finalize);
BENCHMARK(BM_BellmanCurve);
BENCHMARK_MAIN();
