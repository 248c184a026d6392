#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "certsal/attack.hpp"
#include "certsal/certificates.hpp"
#include "certsal/rng.hpp"
#include "oracles.hpp"

using namespace certsal;

namespace {

ProviderSpec spec_of(Transform t, SparsifyParams p = {}) {
  ProviderSpec spec;
  spec.transform = t;
  spec.params = p;
  return spec;
}

std::vector<double> random_input(std::uint64_t seed, int n) {
  GaussianStream rng(seed);
  std::vector<double> x(n);
  for (double& v : x) v = rng.next();
  return x;
}

}  // namespace

TEST_CASE("objective value: anchor point, constant map, linear model") {
  const TinyModel model = make_mlp({8, 12, 3}, 1.0, 11);
  const auto x = random_input(1, 8);
  AttackObjective objective(model, spec_of(Transform::scaled), x, 3, 5);

  // D(x) = -(sum of the top-k saliency values at x).
  const SaliencyVector h = evaluate_provider(model, spec_of(Transform::scaled), x);
  double expected = 0.0;
  for (int i : objective.topk_set()) expected -= h.values[i];
  CHECK(objective.value(x) == doctest::Approx(expected).epsilon(1e-12));

  // Zero-weight model: saliency identically zero, D constant in z.
  TinyModel constant;
  constant.weights.push_back(Eigen::MatrixXd::Zero(2, 4));
  constant.biases.push_back((Eigen::VectorXd(2) << 1.0, 0.0).finished());
  const std::vector<double> cx{0.1, 0.2, 0.3, 0.4};
  AttackObjective const_obj(constant, spec_of(Transform::raw), cx, 2, 5);
  CHECK(const_obj.value(cx) == 0.0);
  CHECK(const_obj.value(std::vector<double>{9.0, -9.0, 0.0, 1.0}) == 0.0);

  // Linear model: |w| is constant, so D does not depend on z.
  TinyModel linear;
  linear.weights.push_back((Eigen::MatrixXd(2, 4) << 1, -2, 3, -4, 0.5, 0.5, 0.5, 0.5).finished());
  linear.biases.push_back(Eigen::VectorXd::Zero(2));
  AttackObjective lin_obj(linear, spec_of(Transform::scaled), cx, 2, 5);
  const double at_anchor = lin_obj.value(cx);
  CHECK(lin_obj.value(std::vector<double>{5.0, 5.0, -5.0, 0.0}) ==
        doctest::Approx(at_anchor).epsilon(1e-12));
  // And the objective gradient vanishes (zero Hessian).
  CHECK(lin_obj.gradient(cx).norm() == 0.0);
}

TEST_CASE("objective gradient: closed form on the bilinear toy at the origin") {
  // One softplus hidden layer, unit output weights, zero biases: the input
  // Hessian at x = 0 is exactly (beta/4) W1^T W1.
  const int d = 6, h = 9;
  const double beta = 1.3;
  TinyModel toy = make_mlp({d, h, 1}, beta, 77);
  toy.biases[0].setZero();
  toy.biases[1].setZero();
  toy.weights[1].setOnes();

  const std::vector<double> x0(d, 0.0);
  const int k = 2;
  AttackObjective objective(toy, spec_of(Transform::raw), x0, k, 3);

  const Eigen::VectorXd g = input_gradient(toy, x0, 0);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(d);
  for (int i : objective.topk_set()) s[i] = (g[i] > 0) ? 1.0 : (g[i] < 0 ? -1.0 : 0.0);
  const Eigen::MatrixXd hess = (beta / 4.0) * toy.weights[0].transpose() * toy.weights[0];
  const Eigen::VectorXd expected = -hess * s;

  const Eigen::VectorXd got = objective.gradient(x0);
  CHECK((got - expected).norm() <= 1e-12 * std::max(1.0, expected.norm()));
}

TEST_CASE("objective gradient agrees with finite differences of D") {
  const TinyModel model = make_mlp({6, 14, 4}, 1.0, 31);
  SplitMix64 seeds(4);
  for (int t = 0; t < 20; ++t) {
    const auto z = random_input(100 + t, 6);
    AttackObjective objective(model, spec_of(Transform::raw), z, 2, 9);
    const Eigen::VectorXd grad = objective.gradient(z);
    auto f = [&](std::span<const double> p) { return objective.value(p); };
    Eigen::VectorXd fd(6);
    for (int i = 0; i < 6; ++i) fd[i] = oracle::central_diff(f, z, i, 1e-3);
    CHECK((grad - fd).norm() <= 1e-2 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("objective gradient rejects the hard-sparsified transform") {
  const TinyModel model = make_mlp({6, 10, 3}, 1.0, 13);
  const auto x = random_input(9, 6);
  AttackObjective objective(model, spec_of(Transform::sparsified, {0.25, 0.0}), x, 2, 5);
  CHECK_NOTHROW(objective.value(x));  // evaluation is fine, only gradients are not
  CHECK_THROWS_WITH_AS(objective.gradient(x), doctest::Contains("relaxed"),
                       std::invalid_argument);
}

TEST_CASE("l2_topk_attack: rho = 0 returns the anchor") {
  const TinyModel model = make_mlp({8, 12, 3}, 1.0, 21);
  const auto x = random_input(3, 8);
  AttackConfig config;
  config.k = 2;
  config.rho = 0.0;
  config.inner_iters = 4;
  config.sampling_budget = 10;
  config.restarts = 2;
  const AttackResult result = l2_topk_attack(model, spec_of(Transform::scaled), x, config, 7);
  REQUIRE_FALSE(result.failed);
  for (int i = 0; i < 8; ++i) CHECK(result.adversarial_input[i] == x[i]);

  AttackObjective objective(model, spec_of(Transform::scaled), x, 2, 7);
  CHECK(result.achieved_d == doctest::Approx(objective.value(x)).epsilon(1e-12));
}

TEST_CASE("l2_topk_attack: feasibility, determinism, selection contract") {
  const TinyModel model = make_mlp({10, 20, 4}, 1.0, 2024);
  AttackConfig config;
  config.k = 3;
  config.rho = 0.8;
  config.inner_iters = 8;
  config.sampling_budget = 60;
  config.restarts = 3;
  config.box_lo = -3.0;
  config.box_hi = 3.0;

  for (int t = 0; t < 10; ++t) {
    auto x = random_input(40 + t, 10);
    for (double& v : x) v = std::clamp(v, -2.5, 2.5);
    const auto spec = spec_of(Transform::scaled);
    const AttackResult result = l2_topk_attack(model, spec, x, config, 900 + t);
    if (result.failed) continue;

    // Independent re-checking of the three constraints.
    double dist2 = 0.0;
    for (int i = 0; i < 10; ++i) {
      const double d = result.adversarial_input[i] - x[i];
      dist2 += d * d;
      CHECK(result.adversarial_input[i] >= config.box_lo);
      CHECK(result.adversarial_input[i] <= config.box_hi);
    }
    CHECK(std::sqrt(dist2) <= config.rho * (1.0 + 1e-9) + 1e-12);
    CHECK(predict_class(model, result.adversarial_input) == predict_class(model, x));

    // The reported value is achieved by the returned iterate.
    AttackObjective objective(model, spec, x, config.k, 900 + t);
    CHECK(result.achieved_d ==
          doctest::Approx(objective.value(result.adversarial_input)).epsilon(1e-12));
    CHECK(result.iterates_evaluated > 0);
    CHECK(result.restarts_used <= config.restarts);

    // Bitwise determinism.
    const AttackResult again = l2_topk_attack(model, spec, x, config, 900 + t);
    CHECK(again.adversarial_input == result.adversarial_input);
    CHECK(again.achieved_d == result.achieved_d);
    CHECK(again.iterates_evaluated == result.iterates_evaluated);
  }
}

TEST_CASE("l2_topk_attack: failure branch when every random start leaves the class") {
  // f1 is a steep V around the anchor, f0 a constant just above it: the
  // anchor is class 0 only inside a thin slab, so rho-sphere samples land in
  // class 1. Seed-frozen fixture.
  const int d = 4;
  TinyModel model;
  model.beta = 1.0;
  Eigen::MatrixXd w1(2, d);
  w1.setZero();
  for (int j = 0; j < d; ++j) {
    w1(0, j) = 4000.0;
    w1(1, j) = -4000.0;
  }
  model.weights.push_back(w1);
  model.biases.push_back(Eigen::VectorXd::Zero(2));
  Eigen::MatrixXd w2(2, 2);
  // f1 = softplus(w.x) + softplus(-w.x), f0 = 0.
  w2 << 0, 0, 1, 1;
  model.weights.push_back(w2);
  Eigen::VectorXd b2(2);
  b2 << 2.0 * std::log(2.0) + 0.05, 0.0;  // f0 wins exactly at the anchor
  model.biases.push_back(b2);

  const std::vector<double> x(d, 0.0);
  REQUIRE(predict_class(model, x) == 0);

  AttackConfig config;
  config.k = 1;
  config.rho = 1.0;
  config.inner_iters = 2;
  config.sampling_budget = 50;
  config.restarts = 3;
  const AttackResult result = l2_topk_attack(model, spec_of(Transform::scaled), x, config, 12345);
  CHECK(result.failed);
  CHECK(result.adversarial_input.empty());
  CHECK(result.restarts_used == 0);
}

TEST_CASE("smoothed objective: common random numbers give a deterministic attack") {
  const TinyModel model = make_mlp({8, 16, 3}, 1.0, 606);
  const auto x = random_input(61, 8);
  ProviderSpec spec = spec_of(Transform::relaxed, {0.4, 0.05});
  spec.smoothing = SmoothingConfig{0.3, 24, 0};  // pool seed derives from the attack seed

  AttackConfig config;
  config.k = 2;
  config.rho = 0.5;
  config.inner_iters = 5;
  config.sampling_budget = 30;
  config.restarts = 2;

  const AttackResult a = l2_topk_attack(model, spec, x, config, 4321);
  const AttackResult b = l2_topk_attack(model, spec, x, config, 4321);
  REQUIRE_FALSE(a.failed);
  CHECK(a.adversarial_input == b.adversarial_input);
  CHECK(a.achieved_d == b.achieved_d);

  const AttackResult other_seed = l2_topk_attack(model, spec, x, config, 4322);
  REQUIRE_FALSE(other_seed.failed);
  CHECK(a.adversarial_input != other_seed.adversarial_input);
}

TEST_CASE("attack lowers top-k overlap on a curved model (scaled map)") {
  // Not a certified bound, just the directional sanity of the optimizer: on
  // a softplus model with enough curvature the attacked map should lose some
  // of its top-k agreement at a generous radius.
  const TinyModel model = make_mlp({12, 32, 16, 4}, 3.0, 515);
  AttackConfig config;
  config.k = 3;
  config.rho = 2.0;
  config.inner_iters = 15;
  config.sampling_budget = 80;
  config.restarts = 3;

  int dropped = 0, tested = 0;
  for (int t = 0; t < 8; ++t) {
    const auto x = random_input(70 + t, 12);
    const auto spec = spec_of(Transform::scaled);
    const AttackResult result = l2_topk_attack(model, spec, x, config, 3000 + t);
    if (result.failed) continue;
    const SaliencyVector before = evaluate_provider(model, spec, x);
    const SaliencyVector after =
        evaluate_provider(model, spec, result.adversarial_input, predict_class(model, x));
    ++tested;
    if (topk_overlap(before.values, after.values, config.k) < config.k) ++dropped;
  }
  REQUIRE(tested >= 4);
  CHECK(dropped >= 1);
}
