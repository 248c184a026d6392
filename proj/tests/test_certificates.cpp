#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "certsal/certificates.hpp"
#include "certsal/rng.hpp"
#include "certsal/verify.hpp"
#include "oracles.hpp"

using namespace certsal;

namespace {

// A SmoothedSaliency with the given mean and a config consistent with params.
SmoothedSaliency make_smoothed(std::vector<double> mean, const CertificateParams& params) {
  SmoothedSaliency s;
  s.mean = std::move(mean);
  s.config.sigma = params.sigma;
  s.config.q = params.q;
  s.config.seed = 0;
  return s;
}

CertificateParams params_with(double rho, double sigma, long q, double p, long n) {
  CertificateParams params;
  params.rho = rho;
  params.sigma = sigma;
  params.q = q;
  params.p = p;
  params.n = n;
  return params;
}

}  // namespace

TEST_CASE("topk_overlap: examples, bounds, symmetry") {
  const std::vector<double> a{0.9, 0.1, 0.8, 0.2};
  CHECK(topk_overlap(a, a, 2) == 2);
  CHECK(topk_overlap(a, a, 4) == 4);

  const std::vector<double> b{0.1, 0.9, 0.8, 0.2};
  CHECK(topk_overlap(a, b, 2) == 1);  // {0,2} vs {1,2}

  CHECK_THROWS_AS(topk_overlap(a, std::vector<double>{1.0}, 1), std::invalid_argument);

  SplitMix64 rng(55);
  for (int t = 0; t < 500; ++t) {
    const int n = 2 + static_cast<int>(rng.next() % 20);
    const int k = 1 + static_cast<int>(rng.next() % n);
    std::vector<double> u(n), v(n);
    for (double& x : u) x = rng.next_unit();
    for (double& x : v) x = rng.next_unit();
    const int overlap = topk_overlap(u, v, k);
    CHECK(overlap == topk_overlap(v, u, k));
    CHECK(overlap <= k);
    CHECK(overlap >= std::max(0, 2 * k - n));
  }
}

TEST_CASE("pairwise_certified: maximal gap, self-comparison, oracle case") {
  // c ~ 0.031 at n = 64 needs q ~ 4083.
  const auto params = params_with(0.1, 1.0, 4083, 0.95, 64);
  CHECK(hoeffding_margin(params) == doctest::Approx(0.031).epsilon(1e-3));

  std::vector<double> mean(64, 0.05);
  mean[0] = 1.0;
  mean[1] = 0.0;
  mean[2] = 0.95;
  const auto s = make_smoothed(mean, params);

  CHECK(pairwise_certified(s, 0, 1, params));        // h_i = 1, h_j = 0
  CHECK_FALSE(pairwise_certified(s, 0, 0, params));  // L^(z) < z at rho, c > 0
  CHECK(pairwise_certified(s, 2, 3, params));        // L^(0.95) ~ 0.854 >= 0.05

  // Parameter mismatch rejected.
  auto wrong_q = params;
  wrong_q.q = 100;
  CHECK_THROWS_AS(pairwise_certified(s, 0, 1, wrong_q), std::invalid_argument);
  auto wrong_n = params;
  wrong_n.n = 32;
  CHECK_THROWS_AS(pairwise_certified(s, 0, 1, wrong_n), std::invalid_argument);
}

TEST_CASE("topk_certificate: worked examples") {
  // L^ ~ z - 0.1 regime: c ~ 0.05 via q = 1015 at n = 4, rho ~ 0.
  const auto params = params_with(1e-9, 1.0, 1015, 0.95, 4);
  CHECK(hoeffding_margin(params) == doctest::Approx(0.05).epsilon(2e-4));
  const auto s = make_smoothed({0.95, 0.9, 0.05, 0.0}, params);
  const CertificateReport report = topk_certificate(s, 2, params);
  CHECK(report.r_cert == 1);
  CHECK(report.k == 2);
  CHECK(report.gap_profile.size() == 2);
  CHECK(report.gap_profile[0].first == 1);
  CHECK(report.gap_profile[0].second > 0.0);
  // i = K compares [K] against itself: the gap is exactly L^(z) - z < 0.
  CHECK(report.gap_profile[1].second < 0.0);
  CHECK(report.margin_c == doctest::Approx(hoeffding_margin(params)));

  // All-equal saliency with rho > 0: no gaps anywhere.
  const auto uniform_params = params_with(0.2, 1.0, 4096, 0.95, 8);
  const auto uniform = make_smoothed(std::vector<double>(8, 0.6), uniform_params);
  CHECK(topk_certificate(uniform, 4, uniform_params).r_cert == 0);

  // Sparsified-style binary vector with K ones, K <= n/2: r_cert = K - 1.
  const auto binary_params = params_with(1e-6, 1.0, 200000, 0.95, 16);
  std::vector<double> binary(16, 0.0);
  for (int i = 0; i < 4; ++i) binary[i] = 1.0;
  const auto sb = make_smoothed(binary, binary_params);
  CHECK(topk_certificate(sb, 4, binary_params).r_cert == 3);

  // K > n/2: indices beyond n are dominated automatically.
  const auto wide_params = params_with(1e-6, 1.0, 200000, 0.95, 4);
  const auto sw = make_smoothed({1.0, 1.0, 1.0, 0.0}, wide_params);
  CHECK(topk_certificate(sw, 3, wide_params).r_cert == 2);

  CHECK_THROWS_AS(topk_certificate(sb, 0, binary_params), std::out_of_range);
  CHECK_THROWS_AS(topk_certificate(sb, 17, binary_params), std::out_of_range);
}

TEST_CASE("rank_certificate: worked examples and the zero boundary") {
  // L^(1) ~ 0.9: c = 0.01 (q at n=4), shift chosen so Phi(Phi^-1(0.99) - s) = 0.91.
  const double c_target = 0.01;
  const long q = static_cast<long>(std::log(2.0 * 4 / 0.05) / (2 * c_target * c_target)) + 1;
  auto params = params_with(0.0, 1.0, q, 0.95, 4);
  const double c = hoeffding_margin(params);
  const double shift = static_cast<double>(oracle::phi_inv(0.99L)) -
                       static_cast<double>(oracle::phi_inv(0.91L + static_cast<long double>(c) - 0.01L));
  params.rho = shift / 2.0;
  // Now empirical_floor_fn(1.0) ~ 0.9.
  CHECK(empirical_floor_fn(1.0, params) == doctest::Approx(0.9).epsilon(5e-3));

  const auto s = make_smoothed({1.0, 1.0, 0.0, 0.0}, params);
  const RankCertificate cert = rank_certificate(s, 0, params);
  REQUIRE(cert.certified_rank.has_value());
  CHECK(*cert.certified_rank == 3);

  // h_i = 0 with rho, c > 0: 0 >= 0 holds, so the certified rank is the
  // position of the smallest element; uncertified only when h_[n] > 0.
  const auto zero_params = params_with(0.3, 1.0, 1000, 0.95, 4);
  const auto sz = make_smoothed({0.5, 0.3, 0.0, 0.0}, zero_params);
  const RankCertificate zero_cert = rank_certificate(sz, 3, zero_params);
  REQUIRE(zero_cert.certified_rank.has_value());
  CHECK(*zero_cert.certified_rank == 3);

  const auto uniform = make_smoothed(std::vector<double>(4, 0.4), zero_params);
  for (int i = 0; i < 4; ++i) {
    CHECK_FALSE(rank_certificate(uniform, i, zero_params).certified_rank.has_value());
  }
}

TEST_CASE("median_rank_bound: premise, division example, limit behavior") {
  // Premise unmet.
  const auto params = params_with(0.05, 0.5, 4096, 0.95, 40);
  CHECK_FALSE(median_rank_bound(11, 0.25, params).has_value());

  // ceil(tau*n) = 10 at n = 40, tau = 0.25; expected value from the oracle.
  const double denom = empirical_floor_fn(0.5, params);
  REQUIRE(denom > 0.0);
  const auto bound = median_rank_bound(7, 0.25, params);
  REQUIRE(bound.has_value());
  CHECK(*bound == std::min<long>(40, ceil_index(10.0 / denom)));

  // L^(1/2) = 0 (huge shift): no guarantee.
  const auto hopeless = params_with(5.0, 0.1, 4096, 0.95, 40);
  CHECK(empirical_floor_fn(0.5, hopeless) == 0.0);
  CHECK_FALSE(median_rank_bound(1, 0.25, hopeless).has_value());

  // Limit regime rho << sigma, q -> infinity with tau = K/(2n): the bound
  // approaches K (the ceil leaves it at K + 1 for any finite q).
  const int k = 8, n = 32;
  const auto limit_params = params_with(1e-12, 1.0, 1000000000L, 0.95, n);
  const double tau = static_cast<double>(k) / (2.0 * n);
  const double lhalf = empirical_floor_fn(0.5, limit_params);
  CHECK(lhalf == doctest::Approx(0.5).epsilon(1e-4));
  const auto limit_bound = median_rank_bound(k / 2, tau, limit_params);
  REQUIRE(limit_bound.has_value());
  CHECK(*limit_bound <= k + 1);
  CHECK(static_cast<double>(ceil_index(tau * n)) / lhalf <= k * (1.0 + 1e-3));
}

TEST_CASE("general_rank_bound: binary profile reduction, zero threshold, cap") {
  SplitMix64 rng(77);
  for (int t = 0; t < 1000; ++t) {
    const long n = 2 + static_cast<long>(rng.next() % 60);
    const double tau = std::nextafter(rng.next_unit(), 1.0);
    const auto params = params_with(0.3 * rng.next_unit(), 0.2 + rng.next_unit(),
                                    100 + static_cast<long>(rng.next() % 10000),
                                    0.5 + 0.49 * rng.next_unit(), n);
    const long threshold = std::clamp(ceil_index(tau * static_cast<double>(n)), 1L, n);
    std::vector<double> profile(n, 0.0);
    for (long j = 0; j < threshold; ++j) profile[j] = 1.0;
    const auto general = general_rank_bound(profile, threshold, params);
    const auto median = median_rank_bound(threshold, tau, params);
    CHECK(general == median);
  }

  // f(T) = 0: no guarantee.
  const auto params = params_with(0.1, 1.0, 4096, 0.95, 4);
  CHECK_FALSE(general_rank_bound(std::vector<double>{1.0, 0.5, 0.0, 0.0}, 3, params).has_value());

  // Derived: f = [1, 0.5, 0.25, 0], T = 2, L^(0.25) ~ 0.2 -> ceil(8.75..) = 9, capped to 4.
  const long q = 4060;
  auto quarter = params_with(0.0, 1.0, q, 0.95, 4);
  CHECK(empirical_floor_fn(0.25, quarter) == doctest::Approx(0.2).epsilon(1e-3));
  const auto bound = general_rank_bound(std::vector<double>{1.0, 0.5, 0.25, 0.0}, 2, quarter);
  REQUIRE(bound.has_value());
  CHECK(*bound == 4);  // 9 capped at n = 4

  CHECK_THROWS_AS(general_rank_bound(std::vector<double>{0.5, 1.0}, 1, params),
                  std::invalid_argument);
  CHECK_THROWS_AS(general_rank_bound(std::vector<double>{1.0, -0.5}, 1, params),
                  std::invalid_argument);
  CHECK_THROWS_AS(general_rank_bound(std::vector<double>{1.0, 0.5}, 3, params),
                  std::out_of_range);
}

TEST_CASE("r_cert monotonicity: nonincreasing in rho, nondecreasing in q") {
  SplitMix64 rng(88);
  for (int t = 0; t < 50; ++t) {
    const int n = 16;
    std::vector<double> mean(n);
    for (double& v : mean) v = rng.next_unit();
    std::sort(mean.begin(), mean.end(), std::greater<double>());

    int prev = n + 1;
    for (double rho : {0.0, 0.05, 0.1, 0.2, 0.4, 0.8}) {
      const auto params = params_with(rho, 0.5, 4096, 0.95, n);
      const auto s = make_smoothed(mean, params);
      const int r = topk_certificate(s, 4, params).r_cert;
      CHECK(r <= prev);
      prev = r;
    }

    int prev_q = -1;
    for (long q : {64L, 256L, 1024L, 4096L, 16384L}) {
      const auto params = params_with(0.05, 0.5, q, 0.95, n);
      const auto s = make_smoothed(mean, params);
      const int r = topk_certificate(s, 4, params).r_cert;
      CHECK(r >= prev_q);
      prev_q = r;
    }
  }
}

TEST_CASE("rank_certificate consistency with pairwise_certified") {
  SplitMix64 rng(99);
  for (int t = 0; t < 100; ++t) {
    const int n = 12;
    const auto params = params_with(0.1 * rng.next_unit(), 0.5, 2048, 0.95, n);
    std::vector<double> mean(n);
    for (double& v : mean) v = rng.next_unit();
    const auto s = make_smoothed(mean, params);
    for (int i = 0; i < n; ++i) {
      const auto cert = rank_certificate(s, i, params);
      if (!cert.certified_rank) continue;
      for (int j = 0; j < n; ++j) {
        if (rank_of(mean, j) >= *cert.certified_rank) {
          CHECK(pairwise_certified(s, i, j, params));
        }
      }
    }
  }
}

TEST_CASE("certificate soundness suite passes; a flipped floor sign makes it fail") {
  CHECK(soundness_suite(2718).passed);

  const FloorFn flipped = [](double z, const CertificateParams& params) {
    const double c = hoeffding_margin(params);
    const double zc = z - c;
    if (zc <= 0.0) return 0.0;
    const double zz = std::min(zc, 1.0 - kInvCdfGuard);
    // Wrong sign on the shift: certifies far too much.
    const double v = std_normal_cdf(std_normal_inv_cdf(zz) + params.shift()) - c;
    return std::clamp(v, 0.0, 1.0);
  };
  CHECK_FALSE(soundness_suite(2718, flipped).passed);
}
