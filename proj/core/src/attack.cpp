#include "certsal/attack.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "certsal/rng.hpp"
#include "certsal/saliency.hpp"

namespace certsal {

namespace {

constexpr int kMaxHalvings = 20;  // backtracking floor; Algorithm spin guard

Eigen::VectorXd to_vec(std::span<const double> x) {
  return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<long>(x.size()));
}

std::span<const double> to_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// Per-sample weight vector w with D's per-index contributions, so that the
// sample gradient is -H w (H the input Hessian of the class score).
// Normalization thresholds are stop-gradients: constants per evaluation.
Eigen::VectorXd objective_weights(const Eigen::VectorXd& g, Transform transform,
                                  const SparsifyParams& params, const std::vector<int>& topk) {
  const long n = g.size();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  auto sign = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };

  switch (transform) {
    case Transform::raw: {
      for (int i : topk) w[i] = sign(g[i]);
      return w;
    }
    case Transform::scaled: {
      const double vmax = g.cwiseAbs().maxCoeff();
      if (vmax <= 0.0) return w;
      for (int i : topk) w[i] = sign(g[i]) / vmax;
      return w;
    }
    case Transform::quadratic: {
      const double vmax2 = g.array().square().maxCoeff();
      if (vmax2 <= 0.0) return w;
      for (int i : topk) w[i] = 2.0 * g[i] / vmax2;
      return w;
    }
    case Transform::relaxed: {
      std::vector<double> mags(n);
      for (long i = 0; i < n; ++i) mags[i] = std::abs(g[i]);
      const long idx_tau = std::clamp(ceil_index(params.tau * static_cast<double>(n)), 1L, n);
      const long idx_gamma = std::clamp(ceil_index(params.gamma * static_cast<double>(n)), 1L, n);
      const double thr_tau = kth_largest(mags, static_cast<double>(idx_tau));
      const double thr_gamma = kth_largest(mags, static_cast<double>(idx_gamma));
      if (thr_gamma <= 0.0) return w;  // middle band empty
      for (int i : topk) {
        if (mags[i] >= thr_tau && mags[i] < thr_gamma) w[i] = sign(g[i]) / thr_gamma;
      }
      return w;
    }
    case Transform::sparsified:
      throw std::invalid_argument(
          "attack: the sparsified map has no defined gradients; attack Transform::relaxed "
          "as the differentiable surrogate");
  }
  throw std::logic_error("objective_weights: bad transform");
}

}  // namespace

SaliencyVector evaluate_provider(const TinyModel& model, const ProviderSpec& spec,
                                 std::span<const double> x, int class_index) {
  if (class_index < 0) class_index = predict_class(model, x);
  if (spec.smoothing) {
    ModelGradientProvider provider(model, class_index, spec.transform, spec.params);
    SmoothOptions options;
    options.median_ranks = false;
    SmoothedSaliency s = smooth(provider, x, *spec.smoothing, options);
    return SaliencyVector{std::move(s.mean), spec.transform, spec.params};
  }
  return apply_transform(spec.transform, spec.params, gradient_magnitudes(model, x, class_index));
}

void AttackConfig::validate() const {
  if (k < 1) throw std::invalid_argument("AttackConfig: k must be >= 1");
  if (!(rho >= 0.0)) throw std::invalid_argument("AttackConfig: rho must be >= 0");
  if (inner_iters < 1) throw std::invalid_argument("AttackConfig: P must be >= 1");
  if (sampling_budget < 1) throw std::invalid_argument("AttackConfig: Q must be >= 1");
  if (restarts < 1) throw std::invalid_argument("AttackConfig: T must be >= 1");
  if (!(box_lo < box_hi)) throw std::invalid_argument("AttackConfig: box_lo must be < box_hi");
}

AttackObjective::AttackObjective(const TinyModel& model, const ProviderSpec& spec,
                                 std::span<const double> x, int k, std::uint64_t seed)
    : model_(&model), spec_(spec) {
  model.validate();
  class_index_ = predict_class(model, x);
  if (spec_.smoothing) {
    SmoothingConfig pool_config = *spec_.smoothing;
    pool_config.seed = mix_seed(seed, 0xCA11);  // common random numbers per attack
    pool_.emplace(model.input_dim(), pool_config);
  }
  const std::vector<double> h_at_x = sample_map(x);
  topk_set_ = topk_indices(h_at_x, k);
}

std::vector<double> AttackObjective::sample_map(std::span<const double> z) const {
  if (pool_) {
    ModelGradientProvider provider(*model_, class_index_, spec_.transform, spec_.params);
    SmoothOptions options;
    options.median_ranks = false;
    return smooth(provider, z, *pool_, options).mean;
  }
  return apply_transform(spec_.transform, spec_.params,
                         gradient_magnitudes(*model_, z, class_index_))
      .values;
}

double AttackObjective::value(std::span<const double> z) const {
  const std::vector<double> h = sample_map(z);
  double d = 0.0;
  for (int i : topk_set_) d -= h[i];
  return d;
}

Eigen::VectorXd AttackObjective::sample_gradient(std::span<const double> z) const {
  const Eigen::VectorXd g = input_gradient(*model_, z, class_index_);
  const Eigen::VectorXd w = objective_weights(g, spec_.transform, spec_.params, topk_set_);
  if (w.isZero(0.0)) return Eigen::VectorXd::Zero(g.size());
  return -hessian_vector_product(*model_, z, class_index_, to_span(w));
}

Eigen::VectorXd AttackObjective::gradient(std::span<const double> z) const {
  if (spec_.transform == Transform::sparsified) {
    throw std::invalid_argument(
        "attack: the sparsified map has no defined gradients; attack Transform::relaxed "
        "as the differentiable surrogate");
  }
  if (!pool_) return sample_gradient(z);
  const Eigen::MatrixXd& eps = pool_->eps();
  Eigen::VectorXd zv = to_vec(z);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(zv.size());
  Eigen::VectorXd sample(zv.size());
  for (long s = 0; s < eps.cols(); ++s) {
    sample = zv + eps.col(s);
    acc += sample_gradient(to_span(sample));
  }
  return acc / static_cast<double>(eps.cols());
}

AttackResult l2_topk_attack(const TinyModel& model, const ProviderSpec& spec,
                            std::span<const double> x, const AttackConfig& config,
                            std::uint64_t seed) {
  config.validate();
  const long n = static_cast<long>(x.size());
  const Eigen::VectorXd anchor = to_vec(x);
  for (long i = 0; i < n; ++i) {
    if (x[i] < config.box_lo || x[i] > config.box_hi) {
      throw std::invalid_argument("l2_topk_attack: anchor input violates the box");
    }
  }

  AttackObjective objective(model, spec, x, config.k, seed);
  const int anchor_class = objective.class_index();

  auto clip_box = [&](Eigen::VectorXd v) {
    return v.cwiseMax(config.box_lo).cwiseMin(config.box_hi);
  };
  auto project_ball = [&](Eigen::VectorXd v) {
    const double dist = (v - anchor).norm();
    if (dist > config.rho && dist > 0.0) v = anchor + (v - anchor) * (config.rho / dist);
    return v;
  };

  AttackResult result;
  bool have_best = false;
  double best_d = 0.0;
  Eigen::VectorXd best_x;

  long sampling_used = 0;
  for (int t = 0; t < config.restarts; ++t) {
    // Random start on the rho-sphere, clipped to the box, class preserved.
    GaussianStream sphere_rng(mix_seed(seed, 0x5EED0000ULL + static_cast<std::uint64_t>(t)));
    Eigen::VectorXd x0;
    bool found = false;
    while (sampling_used < config.sampling_budget) {
      ++sampling_used;
      Eigen::VectorXd dir(n);
      for (long i = 0; i < n; ++i) dir[i] = sphere_rng.next();
      const double norm = dir.norm();
      if (norm <= 0.0) continue;
      x0 = clip_box(anchor + dir * (config.rho / norm));
      ++result.iterates_evaluated;
      if (predict_class(model, to_span(x0)) == anchor_class) {
        found = true;
        break;
      }
    }
    if (!found) break;  // total sampling budget exhausted
    ++result.restarts_used;

    Eigen::VectorXd g0 = objective.gradient(to_span(x0));
    if (!g0.allFinite()) continue;  // gradient blow-up: abort this restart
    const double g0_norm = g0.norm();
    // A zero gradient at the start leaves the step size undefined; fall back
    // to alpha = rho.
    double alpha = (g0_norm > 0.0) ? config.rho / g0_norm : config.rho;

    double restart_best_d = objective.value(to_span(x0));
    Eigen::VectorXd restart_best_x = x0;
    Eigen::VectorXd cur = x0;
    bool aborted = false;

    for (int p = 1; p <= config.inner_iters; ++p) {
      Eigen::VectorXd grad = objective.gradient(to_span(cur));
      if (!grad.allFinite()) {
        aborted = true;
        break;
      }
      int halvings = 0;
      for (;;) {
        Eigen::VectorXd cand = clip_box(project_ball(cur + alpha * grad));
        ++result.iterates_evaluated;
        if (predict_class(model, to_span(cand)) == anchor_class) {
          cur = cand;
          break;
        }
        alpha *= 0.5;
        if (++halvings >= kMaxHalvings) break;  // pinned at a decision boundary
      }
      const double d = objective.value(to_span(cur));
      if (d > restart_best_d) {
        restart_best_d = d;
        restart_best_x = cur;
      }
      alpha *= static_cast<double>(p) / static_cast<double>(p + 1);
    }
    if (aborted) continue;

    if (!have_best || restart_best_d > best_d) {
      have_best = true;
      best_d = restart_best_d;
      best_x = restart_best_x;
    }
  }

  if (!have_best) {
    result.failed = true;
    return result;
  }
  result.achieved_d = best_d;
  result.adversarial_input.assign(best_x.data(), best_x.data() + best_x.size());
  return result;
}

}  // namespace certsal
