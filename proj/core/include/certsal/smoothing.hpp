#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "certsal/saliency.hpp"

namespace certsal {

struct TinyModel;

struct SmoothingConfig {
  double sigma = 0.1;
  long q = 64;
  std::uint64_t seed = 0;

  void validate() const;
};

// Empirical Gaussian smoothing of a per-sample saliency map: the mean over q
// perturbed samples, plus per-index lower medians of the per-sample ranks of
// the pre-transform scores (used by the rank certificates).
struct SmoothedSaliency {
  std::vector<double> mean;
  std::vector<int> median_ranks;  // empty when rank stats were not requested
  SmoothingConfig config;
};

// A per-sample saliency map evaluated column-per-sample. Outputs must lie in
// [0,1]; smoothing aborts on a violation since certificates computed from an
// unbounded map would be unsound.
class SaliencyProvider {
 public:
  virtual ~SaliencyProvider() = default;

  virtual int dim() const = 0;

  // Writes the per-sample saliency of each column of `xs` into the matching
  // column of `out`. When `raw` is non-null, also writes the pre-transform
  // scores used for rank statistics (defaults to the saliency itself).
  // Must be safe for concurrent read-only use.
  virtual void evaluate_block(const Eigen::MatrixXd& xs, Eigen::MatrixXd& out,
                              Eigen::MatrixXd* raw) const = 0;

  std::vector<double> evaluate(std::span<const double> x) const;
};

// Saliency of a TinyModel class score: per-sample gradient magnitudes run
// through the given transform. The class is fixed by the caller (normally the
// model's prediction at the unperturbed input).
class ModelGradientProvider : public SaliencyProvider {
 public:
  ModelGradientProvider(const TinyModel& model, int class_index, Transform transform,
                        SparsifyParams params = {});

  int dim() const override;
  void evaluate_block(const Eigen::MatrixXd& xs, Eigen::MatrixXd& out,
                      Eigen::MatrixXd* raw) const override;

  int class_index() const { return class_index_; }
  Transform transform() const { return transform_; }
  const SparsifyParams& params() const { return params_; }
  const TinyModel& model() const { return *model_; }

 private:
  const TinyModel* model_;
  int class_index_;
  Transform transform_;
  SparsifyParams params_;
};

// Test provider with a known population mean: h_i(x) = 1{a_i . x >= b_i},
// whose Gaussian smoothing is exactly Phi((a_i . x - b_i) / (sigma ||a_i||)).
class HalfSpaceProvider : public SaliencyProvider {
 public:
  HalfSpaceProvider(Eigen::MatrixXd normals, Eigen::VectorXd offsets);

  int dim() const override;
  void evaluate_block(const Eigen::MatrixXd& xs, Eigen::MatrixXd& out,
                      Eigen::MatrixXd* raw) const override;

  // Exact population smoothed value per coordinate.
  std::vector<double> closed_form_mean(std::span<const double> x, double sigma) const;

  // Deterministic random instance: unit-ish normals, offsets placed so that
  // closed-form means at `x` spread over (lo, hi).
  static HalfSpaceProvider random(int n, std::span<const double> x, double sigma, double lo,
                                  double hi, std::uint64_t seed);

  const Eigen::MatrixXd& normals() const { return normals_; }
  const Eigen::VectorXd& offsets() const { return offsets_; }

 private:
  Eigen::MatrixXd normals_;  // row i = a_i
  Eigen::VectorXd offsets_;
};

// Wraps a plain function for tests.
class FunctionProvider : public SaliencyProvider {
 public:
  using Fn = std::function<std::vector<double>(std::span<const double>)>;
  FunctionProvider(int dim, Fn fn) : dim_(dim), fn_(std::move(fn)) {}

  int dim() const override { return dim_; }
  void evaluate_block(const Eigen::MatrixXd& xs, Eigen::MatrixXd& out,
                      Eigen::MatrixXd* raw) const override;

 private:
  int dim_;
  Fn fn_;
};

// The q Gaussian perturbations of x under the config, materialized.
// Perturbation i depends only on (x, seed, i), so it can be regenerated in
// isolation; the streaming smoothing paths draw the identical sequence.
std::vector<std::vector<double>> gaussian_perturbations(std::span<const double> x,
                                                        const SmoothingConfig& config);

// Fills out[0..n) with perturbation i (x + sigma * noise) of the config's
// sequence.
void fill_perturbation(std::span<const double> x, const SmoothingConfig& config, long i,
                       std::span<double> out);

struct SmoothOptions {
  bool median_ranks = true;
  int max_threads = 0;  // 0 = auto
};

// h~(x): mean over q per-sample provider outputs, deterministic given
// (provider, x, config) regardless of thread count. Per-sample work runs in
// fixed-size blocks; block sums are combined pairwise in block order.
SmoothedSaliency smooth(const SaliencyProvider& provider, std::span<const double> x,
                        const SmoothingConfig& config, const SmoothOptions& options = {});

// A fixed set of q Gaussian perturbations for common-random-number smoothing:
// repeated queries at nearby points reuse the identical noise.
class SmoothingPool {
 public:
  SmoothingPool(int dim, const SmoothingConfig& config);

  const Eigen::MatrixXd& eps() const { return eps_; }  // dim x q
  const SmoothingConfig& config() const { return config_; }
  int dim() const { return static_cast<int>(eps_.rows()); }

 private:
  Eigen::MatrixXd eps_;
  SmoothingConfig config_;
};

// smooth() against the fixed pool instead of fresh draws.
SmoothedSaliency smooth(const SaliencyProvider& provider, std::span<const double> x,
                        const SmoothingPool& pool, const SmoothOptions& options = {});

// Fast pooled smoother for TinyModel gradient saliency: caches the input
// layer's projection of the pool so that repeated mean queries at many nearby
// points skip the dominant first-layer product. Used for large-q population
// surrogates and attack objectives.
class PooledModelSmoother {
 public:
  PooledModelSmoother(const TinyModel& model, int class_index, Transform transform,
                      SparsifyParams params, const SmoothingPool& pool);

  // h~(x) via the pool; no rank statistics.
  std::vector<double> mean(std::span<const double> x, int max_threads = 0) const;

  const SmoothingPool& pool() const { return *pool_; }

 private:
  const TinyModel* model_;
  int class_index_;
  Transform transform_;
  SparsifyParams params_;
  const SmoothingPool* pool_;
  Eigen::MatrixXd first_layer_eps_;  // W_0 * eps, cached
};

}  // namespace certsal
