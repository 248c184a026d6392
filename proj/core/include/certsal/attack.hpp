#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "certsal/nn.hpp"
#include "certsal/smoothing.hpp"

namespace certsal {

// Which saliency map the attack targets: a transform of the model's gradient
// magnitudes, optionally smoothed. Smoothed objectives reuse one fixed set of
// perturbation seeds across all iterations (common random numbers), which
// keeps the objective a deterministic function and lowers gradient variance.
struct ProviderSpec {
  Transform transform = Transform::scaled;
  SparsifyParams params{};
  std::optional<SmoothingConfig> smoothing;
};

// Evaluates the provider map at x (smoothed when the spec says so).
// class_index < 0 selects the model's prediction at x.
SaliencyVector evaluate_provider(const TinyModel& model, const ProviderSpec& spec,
                                 std::span<const double> x, int class_index = -1);

struct AttackConfig {
  int k = 1;
  double rho = 1.0;              // L2 budget
  int inner_iters = 20;          // P
  int sampling_budget = 100;     // Q, total across restarts
  int restarts = 5;              // T
  double box_lo = -std::numeric_limits<double>::infinity();
  double box_hi = std::numeric_limits<double>::infinity();

  void validate() const;
};

struct AttackResult {
  std::vector<double> adversarial_input;  // empty when failed
  bool failed = false;
  double achieved_d = 0.0;  // max D over evaluated in-class iterates
  long iterates_evaluated = 0;
  int restarts_used = 0;  // restarts that found an in-class start
};

// D(z) = -sum over the fixed top-k index set of the provider map at z, and
// its input gradient. The top-k set and the class are pinned at the anchor
// input; normalization thresholds inside the transforms are treated as
// constants per step (the top-K objective is scale-invariant).
class AttackObjective {
 public:
  // seed drives the common-random-number pool of smoothed objectives.
  AttackObjective(const TinyModel& model, const ProviderSpec& spec, std::span<const double> x,
                  int k, std::uint64_t seed);

  double value(std::span<const double> z) const;

  // Throws std::invalid_argument for the hard-sparsified transform, which has
  // no usable gradient; use Transform::relaxed as the differentiable
  // surrogate.
  Eigen::VectorXd gradient(std::span<const double> z) const;

  const std::vector<int>& topk_set() const { return topk_set_; }
  int class_index() const { return class_index_; }

 private:
  Eigen::VectorXd sample_gradient(std::span<const double> z) const;
  std::vector<double> sample_map(std::span<const double> z) const;

  const TinyModel* model_;
  ProviderSpec spec_;
  int class_index_ = 0;
  std::vector<int> topk_set_;
  std::optional<SmoothingPool> pool_;
};

// The projected-ascent attack on top-k overlap: random starts on the
// rho-sphere (class-preserving, at most Q sampling attempts in total),
// ascent on D with projection onto the rho-ball and the box, backtracking
// halving of the step on class changes, harmonic step decay, best-iterate
// selection per restart and across restarts. Fails only when no in-class
// random start was found.
AttackResult l2_topk_attack(const TinyModel& model, const ProviderSpec& spec,
                            std::span<const double> x, const AttackConfig& config,
                            std::uint64_t seed);

}  // namespace certsal
