#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "certsal/nn.hpp"
#include "certsal/rng.hpp"
#include "certsal/saliency.hpp"
#include "oracles.hpp"

using namespace certsal;

namespace {

std::vector<double> random_vector(SplitMix64& rng, int n, bool nonneg = true) {
  std::vector<double> v(n);
  for (double& x : v) {
    x = rng.next_unit();
    if (!nonneg) x -= 0.5;
  }
  return v;
}

// Brute-force sparsification: explicit sort, threshold, mark.
std::vector<double> sparsify_brute(const std::vector<double>& v, double tau) {
  std::vector<double> sorted(v);
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  const long k = std::clamp(ceil_index(tau * static_cast<double>(v.size())), 1L,
                            static_cast<long>(v.size()));
  const double thr = sorted[k - 1];
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] >= thr ? 1.0 : 0.0;
  return out;
}

std::vector<double> relaxed_brute(const std::vector<double>& v, double tau, double gamma) {
  std::vector<double> sorted(v);
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  const long n = static_cast<long>(v.size());
  const long kt = std::clamp(ceil_index(tau * static_cast<double>(n)), 1L, n);
  const long kg = std::clamp(ceil_index(gamma * static_cast<double>(n)), 1L, n);
  const double thr_tau = sorted[kt - 1];
  const double thr_gamma = sorted[kg - 1];
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < thr_tau) {
      out[i] = 0.0;
    } else if (v[i] >= thr_gamma) {
      out[i] = 1.0;
    } else {
      out[i] = v[i] / thr_gamma;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("scale_unit examples and scale invariance") {
  CHECK(scale_unit({2, 1, 4}).values == std::vector<double>{0.5, 0.25, 1.0});
  CHECK(scale_unit({0, 0, 0}).values == std::vector<double>{0, 0, 0});
  CHECK(scale_unit({1e-12, 1e-12}).values == std::vector<double>{1.0, 1.0});

  SplitMix64 rng(11);
  for (int t = 0; t < 100; ++t) {
    const std::vector<double> v = random_vector(rng, 16);
    const double scale = 0.01 + 100.0 * rng.next_unit();
    std::vector<double> scaled(v);
    for (double& x : scaled) x *= scale;
    const auto a = scale_unit(v);
    const auto b = scale_unit(scaled);
    for (int i = 0; i < 16; ++i) CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-12));
  }
}

TEST_CASE("quadratic_map: square then scale") {
  const auto q = quadratic_map({2, 1, 4});
  CHECK(q.values[0] == doctest::Approx(0.25));
  CHECK(q.values[1] == doctest::Approx(0.0625));
  CHECK(q.values[2] == doctest::Approx(1.0));
  CHECK(quadratic_map({3, 3, 3}).values == std::vector<double>{1, 1, 1});
  CHECK(quadratic_map({0, 0}).values == std::vector<double>{0, 0});
}

TEST_CASE("sparsify examples") {
  SparsifyParams p;
  p.tau = 0.5;
  CHECK(sparsify(std::vector<double>{0.9, 0.5, 0.1, 0.7}, p).values ==
        std::vector<double>{1, 0, 0, 1});
  p.tau = 1.0;
  CHECK(sparsify(std::vector<double>{0.3, 0.9, 0.0}, p).values == std::vector<double>{1, 1, 1});
  p.tau = 0.25;
  CHECK(sparsify(std::vector<double>{0.5, 0.5, 0.5, 0.1}, p).values ==
        std::vector<double>{1, 1, 1, 0});
}

TEST_CASE("sparsify vs brute-force oracle; ones-count bounds") {
  SplitMix64 rng(22);
  for (int t = 0; t < 1000; ++t) {
    const int n = 1 + static_cast<int>(rng.next() % 32);
    std::vector<double> v = random_vector(rng, n);
    if (t % 3 == 0 && n > 2) v[n / 2] = v[0];  // inject ties
    const double tau = std::nextafter(rng.next_unit(), 1.0);
    SparsifyParams p;
    p.tau = tau;
    const auto got = sparsify(v, p);
    CHECK(got.values == sparsify_brute(v, tau));

    long ones = 0;
    for (double x : got.values) {
      CHECK((x == 0.0 || x == 1.0));
      ones += x == 1.0;
    }
    const long k = std::clamp(ceil_index(tau * n), 1L, static_cast<long>(n));
    CHECK(ones >= k);
    std::vector<double> dedup(v);
    std::sort(dedup.begin(), dedup.end());
    if (std::adjacent_find(dedup.begin(), dedup.end()) == dedup.end()) CHECK(ones == k);
  }
}

TEST_CASE("relaxed_sparsify examples") {
  SparsifyParams p;
  p.gamma = 0.25;
  p.tau = 0.75;
  auto r = relaxed_sparsify(std::vector<double>{1.0, 0.8, 0.4, 0.2}, p);
  CHECK(r.values[0] == doctest::Approx(1.0));
  CHECK(r.values[1] == doctest::Approx(0.8));
  CHECK(r.values[2] == doctest::Approx(0.4));
  CHECK(r.values[3] == doctest::Approx(0.0));

  p.gamma = 0.5;
  r = relaxed_sparsify(std::vector<double>{1.0, 0.8, 0.4, 0.2}, p);
  CHECK(r.values[0] == doctest::Approx(1.0));
  CHECK(r.values[1] == doctest::Approx(1.0));
  CHECK(r.values[2] == doctest::Approx(0.5));
  CHECK(r.values[3] == doctest::Approx(0.0));
}

TEST_CASE("relaxed_sparsify: gamma=tau reduces to sparsify; order preserved; in [0,1]") {
  SplitMix64 rng(33);
  for (int t = 0; t < 1000; ++t) {
    const int n = 1 + static_cast<int>(rng.next() % 24);
    const std::vector<double> v = random_vector(rng, n);
    const double tau = std::nextafter(rng.next_unit(), 1.0);
    SparsifyParams same;
    same.tau = tau;
    same.gamma = tau;
    CHECK(relaxed_sparsify(v, same).values == sparsify(v, same).values);

    SparsifyParams p;
    p.tau = tau;
    p.gamma = tau * rng.next_unit();
    const auto r = relaxed_sparsify(v, p);
    CHECK(r.values == relaxed_brute(v, p.tau, p.gamma));
    for (double x : r.values) {
      CHECK(x >= 0.0);
      CHECK(x <= 1.0);
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (v[i] >= v[j]) CHECK(r.values[i] >= r.values[j]);
      }
    }
  }
}

TEST_CASE("rank_of: examples, ties, bounds") {
  CHECK(rank_of(std::vector<double>{0.1, 0.9, 0.5}, 1) == 1);
  CHECK(rank_of(std::vector<double>{0.5, 0.5}, 0) == 1);
  CHECK(rank_of(std::vector<double>{0.5, 0.5}, 1) == 2);
  CHECK(rank_of(std::vector<double>{3.0}, 0) == 1);
  CHECK_THROWS_AS(rank_of(std::vector<double>{1.0}, 1), std::out_of_range);
  CHECK_THROWS_AS(rank_of(std::vector<double>{1.0}, -1), std::out_of_range);

  // rank_all agrees with rank_of.
  SplitMix64 rng(44);
  for (int t = 0; t < 100; ++t) {
    const int n = 1 + static_cast<int>(rng.next() % 20);
    std::vector<double> v = random_vector(rng, n);
    if (t % 2 == 0 && n > 1) v[0] = v[n - 1];
    std::vector<int> ranks(n);
    rank_all(v, ranks);
    for (int i = 0; i < n; ++i) CHECK(ranks[i] == rank_of(v, i));
  }
}

TEST_CASE("kth_largest: examples, ceiling convention, range errors") {
  CHECK(kth_largest(std::vector<double>{0.2, 0.8, 0.5}, 2) == 0.5);
  CHECK(kth_largest(std::vector<double>{0.2, 0.8, 0.5}, 1.5) == 0.5);  // ceil(1.5) = 2
  CHECK(kth_largest(std::vector<double>{7.25}, 1) == 7.25);
  CHECK_THROWS_AS(kth_largest(std::vector<double>{1.0, 2.0}, 3), std::out_of_range);
  CHECK_THROWS_AS(kth_largest(std::vector<double>{1.0, 2.0}, 0), std::out_of_range);
  // Guard against products like 0.3 * 10 = 3.0000000000000004.
  std::vector<double> ten(10);
  for (int i = 0; i < 10; ++i) ten[i] = 10 - i;
  CHECK(kth_largest(ten, 0.3 * 10) == 8.0);
}

TEST_CASE("topk_indices uses the rank tie convention") {
  const std::vector<double> v{0.5, 0.9, 0.5, 0.1};
  const auto top = topk_indices(v, 2);
  CHECK(top == std::vector<int>{1, 0});
  CHECK_THROWS_AS(topk_indices(v, 5), std::out_of_range);
}

TEST_CASE("gradient_magnitudes: linear and constant models") {
  // Single linear layer: gradient of class 0 is row 0 of W.
  TinyModel linear;
  linear.beta = 1.0;
  linear.weights.push_back((Eigen::MatrixXd(2, 3) << 1.5, -2.0, 0.25, 0.0, 1.0, -1.0).finished());
  linear.biases.push_back(Eigen::VectorXd::Zero(2));

  const std::vector<double> x{0.3, -0.7, 2.0};
  const auto mags = gradient_magnitudes(linear, x, 0);
  CHECK(mags == std::vector<double>{1.5, 2.0, 0.25});
  // Regardless of x.
  const std::vector<double> y{-5.0, 0.0, 11.0};
  CHECK(gradient_magnitudes(linear, y, 0) == mags);

  TinyModel constant;
  constant.beta = 1.0;
  constant.weights.push_back(Eigen::MatrixXd::Zero(2, 3));
  constant.biases.push_back((Eigen::VectorXd(2) << 0.5, -0.5).finished());
  CHECK(gradient_magnitudes(constant, x, 0) == std::vector<double>{0, 0, 0});

  CHECK_THROWS_AS(gradient_magnitudes(linear, std::vector<double>{1.0}, 0),
                  std::invalid_argument);
}

TEST_CASE("gradient_magnitudes agrees with central finite differences") {
  const TinyModel model = make_mlp({8, 16, 5}, 1.0, 321);
  GaussianStream xrng(777);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> x(8);
    for (double& v : x) v = xrng.next();
    const int cls = predict_class(model, x);
    const auto mags = gradient_magnitudes(model, x, cls);
    auto f = [&](std::span<const double> z) { return forward(model, z)[cls]; };
    for (int i = 0; i < 8; ++i) {
      const double fd = std::abs(oracle::central_diff(f, x, i, 1e-4));
      CHECK(mags[i] == doctest::Approx(fd).epsilon(1e-3));
    }
  }
}
