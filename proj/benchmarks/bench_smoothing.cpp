#include <benchmark/benchmark.h>

#include "certsal/nn.hpp"
#include "certsal/rng.hpp"
#include "certsal/smoothing.hpp"

using namespace certsal;

namespace {

TinyModel bench_model() { return make_mlp({64, 16, 10}, 1.0, 42); }

std::vector<double> bench_input() {
  GaussianStream rng(7);
  std::vector<double> x(64);
  for (double& v : x) v = rng.next();
  return x;
}

}  // namespace

static void BM_SmoothSparsified(benchmark::State& state) {
  const TinyModel model = bench_model();
  const auto x = bench_input();
  ModelGradientProvider provider(model, 0, Transform::sparsified, SparsifyParams{0.25, 0.0});
  SmoothingConfig config{0.2, state.range(0), 11};
  SmoothOptions options;
  options.median_ranks = false;
  for (auto _ : state) {
    benchmark::DoNotOptimize(smooth(provider, x, config, options));
  }
  state.SetItemsProcessed(state.iterations() * config.q);
}
BENCHMARK(BM_SmoothSparsified)->Arg(1024)->Arg(4096);

// The population-surrogate hot path: pooled mean at q = 1e5.
static void BM_PooledMean(benchmark::State& state) {
  const TinyModel model = bench_model();
  const auto x = bench_input();
  SmoothingConfig config{0.2, state.range(0), 13};
  const SmoothingPool pool(64, config);
  const PooledModelSmoother smoother(model, 0, Transform::sparsified, SparsifyParams{0.25, 0.0},
                                     pool);
  for (auto _ : state) {
    benchmark::DoNotOptimize(smoother.mean(x));
  }
  state.SetItemsProcessed(state.iterations() * config.q);
}
BENCHMARK(BM_PooledMean)->Arg(100000)->Unit(benchmark::kMillisecond);
