#include <benchmark/benchmark.h>

#include "certsal/attack.hpp"
#include "certsal/rng.hpp"

using namespace certsal;

static void BM_AttackSmoothedRelaxed(benchmark::State& state) {
  const TinyModel model = make_mlp({64, 16, 10}, 1.0, 42);
  GaussianStream rng(7);
  std::vector<double> x(64);
  for (double& v : x) v = rng.next();

  ProviderSpec spec;
  spec.transform = Transform::relaxed;
  spec.params = SparsifyParams{0.25, 0.01};
  spec.smoothing = SmoothingConfig{0.2, 64, 0};

  AttackConfig config;
  config.k = 16;
  config.rho = 0.05;
  config.inner_iters = 10;
  config.sampling_budget = 50;
  config.restarts = 2;

  std::uint64_t seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(l2_topk_attack(model, spec, x, config, seed++));
  }
}
BENCHMARK(BM_AttackSmoothedRelaxed)->Unit(benchmark::kMillisecond);
