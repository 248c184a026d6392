#include <benchmark/benchmark.h>

#include "certsal/numerics.hpp"

using namespace certsal;

static void BM_StdNormalCdf(benchmark::State& state) {
  double z = -4.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(std_normal_cdf(z));
    z += 1e-6;
  }
}
BENCHMARK(BM_StdNormalCdf);

static void BM_StdNormalInvCdf(benchmark::State& state) {
  double p = 0.001;
  for (auto _ : state) {
    benchmark::DoNotOptimize(std_normal_inv_cdf(p));
    p += 1e-7;
    if (p >= 0.999) p = 0.001;
  }
}
BENCHMARK(BM_StdNormalInvCdf);

static void BM_EmpiricalFloor(benchmark::State& state) {
  CertificateParams params;
  params.rho = 0.05;
  params.sigma = 0.2;
  params.q = 4096;
  params.p = 0.95;
  params.n = 64;
  double z = 0.2;
  for (auto _ : state) {
    benchmark::DoNotOptimize(empirical_floor_fn(z, params));
    z = (z >= 0.95) ? 0.2 : z + 1e-5;
  }
}
BENCHMARK(BM_EmpiricalFloor);
