#include "certsal/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "certsal/nn.hpp"
#include "certsal/numerics.hpp"
#include "certsal/parallel.hpp"
#include "certsal/rng.hpp"

namespace certsal {

namespace {

constexpr long kBlock = 256;           // fixed block size: results never depend on thread count
constexpr double kRangeSlack = 1e-12;  // tolerance for the [0,1] output contract

void check_output_range(const Eigen::MatrixXd& out) {
  const double lo = out.minCoeff();
  const double hi = out.maxCoeff();
  if (lo < -kRangeSlack || hi > 1.0 + kRangeSlack) {
    throw std::logic_error(
        "smoothing: provider output outside [0,1] (certificates would be unsound); "
        "got range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
}

// Pairwise, fixed-order combination of per-block sums.
Eigen::VectorXd pairwise_reduce(std::vector<Eigen::VectorXd>& sums) {
  const std::size_t blocks = sums.size();
  for (std::size_t step = 1; step < blocks; step *= 2) {
    for (std::size_t i = 0; i + step < blocks; i += 2 * step) {
      sums[i] += sums[i + step];
    }
  }
  return sums.empty() ? Eigen::VectorXd() : sums[0];
}

}  // namespace

void SmoothingConfig::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("SmoothingConfig: sigma must be > 0");
  if (q < 1) throw std::invalid_argument("SmoothingConfig: q must be >= 1");
}

std::vector<double> SaliencyProvider::evaluate(std::span<const double> x) const {
  Eigen::MatrixXd xs = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<long>(x.size()));
  Eigen::MatrixXd out(dim(), 1);
  evaluate_block(xs, out, nullptr);
  return std::vector<double>(out.col(0).data(), out.col(0).data() + out.rows());
}

ModelGradientProvider::ModelGradientProvider(const TinyModel& model, int class_index,
                                             Transform transform, SparsifyParams params)
    : model_(&model), class_index_(class_index), transform_(transform), params_(params) {
  model.validate();
  if (transform == Transform::sparsified || transform == Transform::relaxed) params.validate();
  if (class_index_ < 0 || class_index_ >= model.output_dim()) {
    throw std::invalid_argument("ModelGradientProvider: class index out of range");
  }
}

int ModelGradientProvider::dim() const { return model_->input_dim(); }

void ModelGradientProvider::evaluate_block(const Eigen::MatrixXd& xs, Eigen::MatrixXd& out,
                                           Eigen::MatrixXd* raw) const {
  input_gradient_batch(*model_, xs, class_index_, out);
  out = out.array().abs().matrix();
  if (raw) *raw = out;
  std::vector<double> scratch(out.rows());
  for (long c = 0; c < out.cols(); ++c) {
    std::span<double> col(out.col(c).data(), static_cast<std::size_t>(out.rows()));
    kernels::apply_inplace(transform_, params_, col, scratch);
  }
}

HalfSpaceProvider::HalfSpaceProvider(Eigen::MatrixXd normals, Eigen::VectorXd offsets)
    : normals_(std::move(normals)), offsets_(std::move(offsets)) {
  if (normals_.rows() != offsets_.size()) {
    throw std::invalid_argument("HalfSpaceProvider: normals/offsets mismatch");
  }
}

int HalfSpaceProvider::dim() const { return static_cast<int>(normals_.rows()); }

void HalfSpaceProvider::evaluate_block(const Eigen::MatrixXd& xs, Eigen::MatrixXd& out,
                                       Eigen::MatrixXd* raw) const {
  Eigen::MatrixXd scores = (normals_ * xs).colwise() - offsets_;
  out = (scores.array() >= 0.0).cast<double>().matrix();
  if (raw) *raw = scores;  // pre-threshold margins carry the rank information
}

std::vector<double> HalfSpaceProvider::closed_form_mean(std::span<const double> x,
                                                        double sigma) const {
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<long>(x.size()));
  std::vector<double> mean(normals_.rows());
  for (long i = 0; i < normals_.rows(); ++i) {
    const double norm = normals_.row(i).norm();
    mean[i] = std_normal_cdf((normals_.row(i).dot(xv) - offsets_[i]) / (sigma * norm));
  }
  return mean;
}

HalfSpaceProvider HalfSpaceProvider::random(int n, std::span<const double> x, double sigma,
                                            double lo, double hi, std::uint64_t seed) {
  const int d = static_cast<int>(x.size());
  Eigen::MatrixXd normals(n, d);
  Eigen::VectorXd offsets(n);
  GaussianStream rng(mix_seed(seed, 0xA5));
  SplitMix64 urng(mix_seed(seed, 0xB6));
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) normals(i, j) = rng.next();
    const double norm = normals.row(i).norm();
    // Target mean at x spread over (lo, hi).
    const double t = lo + (hi - lo) * ((i + 0.5) / n) +
                     0.05 * (hi - lo) * (urng.next_unit() - 0.5);
    offsets[i] = normals.row(i).dot(xv) - sigma * norm * std_normal_inv_cdf(t);
  }
  return HalfSpaceProvider(std::move(normals), std::move(offsets));
}

void FunctionProvider::evaluate_block(const Eigen::MatrixXd& xs, Eigen::MatrixXd& out,
                                      Eigen::MatrixXd* raw) const {
  for (long c = 0; c < xs.cols(); ++c) {
    std::span<const double> x(xs.col(c).data(), static_cast<std::size_t>(xs.rows()));
    const std::vector<double> v = fn_(x);
    if (static_cast<int>(v.size()) != dim_) {
      throw std::invalid_argument("FunctionProvider: wrong output size");
    }
    for (int i = 0; i < dim_; ++i) out(i, c) = v[i];
  }
  if (raw) *raw = out;
}

void fill_perturbation(std::span<const double> x, const SmoothingConfig& config, long i,
                       std::span<double> out) {
  if (out.size() != x.size()) throw std::invalid_argument("fill_perturbation: size mismatch");
  GaussianStream g(mix_seed(config.seed, static_cast<std::uint64_t>(i)));
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = x[j] + config.sigma * g.next();
}

std::vector<std::vector<double>> gaussian_perturbations(std::span<const double> x,
                                                        const SmoothingConfig& config) {
  config.validate();
  std::vector<std::vector<double>> result(config.q, std::vector<double>(x.size()));
  for (long i = 0; i < config.q; ++i) fill_perturbation(x, config, i, result[i]);
  return result;
}

namespace {

// Shared smoothing core. fill_xs(block_start, xs) populates perturbed inputs
// for one block.
SmoothedSaliency smooth_core(const SaliencyProvider& provider, const SmoothingConfig& config,
                             const SmoothOptions& options,
                             const std::function<void(long, Eigen::MatrixXd&)>& fill_xs,
                             int input_dim) {
  config.validate();
  const int n = provider.dim();
  const long q = config.q;
  const long blocks = (q + kBlock - 1) / kBlock;

  std::vector<Eigen::VectorXd> block_sums(blocks);
  // Per-sample ranks of the pre-transform scores; column j holds index j's
  // ranks across all q samples.
  Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic> rank_store;
  if (options.median_ranks) {
    if (static_cast<double>(q) * n > 2.5e8) {
      throw std::invalid_argument(
          "smooth: rank statistics would need > 1 GB at q*n = " + std::to_string(q * n) +
          "; disable median_ranks for population-surrogate runs");
    }
    rank_store.resize(q, n);
  }

  parallel_for(
      static_cast<std::size_t>(blocks),
      [&](std::size_t b) {
        const long start = static_cast<long>(b) * kBlock;
        const long count = std::min<long>(kBlock, q - start);
        Eigen::MatrixXd xs(input_dim, count);
        fill_xs(start, xs);
        Eigen::MatrixXd out(n, count);
        Eigen::MatrixXd raw;
        Eigen::MatrixXd* raw_ptr = options.median_ranks ? &raw : nullptr;
        provider.evaluate_block(xs, out, raw_ptr);
        check_output_range(out);
        block_sums[b] = out.rowwise().sum();
        if (options.median_ranks) {
          std::vector<int> ranks(n);
          for (long c = 0; c < count; ++c) {
            std::span<const double> col(raw.col(c).data(), static_cast<std::size_t>(n));
            rank_all(col, ranks);
            for (int j = 0; j < n; ++j) rank_store(start + c, j) = ranks[j];
          }
        }
      },
      options.max_threads);

  SmoothedSaliency result;
  result.config = config;
  Eigen::VectorXd total = pairwise_reduce(block_sums);
  result.mean.resize(n);
  for (int i = 0; i < n; ++i) result.mean[i] = total[i] / static_cast<double>(q);

  if (options.median_ranks) {
    result.median_ranks.resize(n);
    // Lower median: the ceil(q/2)-th smallest of the q ranks.
    const long m = (q + 1) / 2;
    std::vector<std::int32_t> column(q);
    for (int j = 0; j < n; ++j) {
      for (long s = 0; s < q; ++s) column[s] = rank_store(s, j);
      std::nth_element(column.begin(), column.begin() + (m - 1), column.end());
      result.median_ranks[j] = column[m - 1];
    }
  }
  return result;
}

}  // namespace

SmoothedSaliency smooth(const SaliencyProvider& provider, std::span<const double> x,
                        const SmoothingConfig& config, const SmoothOptions& options) {
  const int input_dim = static_cast<int>(x.size());
  auto fill = [&](long start, Eigen::MatrixXd& xs) {
    for (long c = 0; c < xs.cols(); ++c) {
      std::span<double> col(xs.col(c).data(), static_cast<std::size_t>(xs.rows()));
      fill_perturbation(x, config, start + c, col);
    }
  };
  return smooth_core(provider, config, options, fill, input_dim);
}

SmoothingPool::SmoothingPool(int dim, const SmoothingConfig& config) : config_(config) {
  config.validate();
  eps_.resize(dim, config.q);
  for (long i = 0; i < config.q; ++i) {
    GaussianStream g(mix_seed(config.seed, static_cast<std::uint64_t>(i)));
    for (int j = 0; j < dim; ++j) eps_(j, i) = config.sigma * g.next();
  }
}

SmoothedSaliency smooth(const SaliencyProvider& provider, std::span<const double> x,
                        const SmoothingPool& pool, const SmoothOptions& options) {
  if (static_cast<int>(x.size()) != pool.dim()) {
    throw std::invalid_argument("smooth: input does not match pool dimension");
  }
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), pool.dim());
  auto fill = [&](long start, Eigen::MatrixXd& xs) {
    xs = pool.eps().middleCols(start, xs.cols()).colwise() + xv;
  };
  return smooth_core(provider, pool.config(), options, fill, pool.dim());
}

PooledModelSmoother::PooledModelSmoother(const TinyModel& model, int class_index,
                                         Transform transform, SparsifyParams params,
                                         const SmoothingPool& pool)
    : model_(&model),
      class_index_(class_index),
      transform_(transform),
      params_(params),
      pool_(&pool) {
  model.validate();
  if (class_index < 0 || class_index >= model.output_dim()) {
    throw std::invalid_argument("PooledModelSmoother: class index out of range");
  }
  if (pool.dim() != model.input_dim()) {
    throw std::invalid_argument("PooledModelSmoother: pool does not match model input");
  }
  first_layer_eps_ = model.weights.front() * pool.eps();
}

std::vector<double> PooledModelSmoother::mean(std::span<const double> x, int max_threads) const {
  const TinyModel& m = *model_;
  if (static_cast<int>(x.size()) != m.input_dim()) {
    throw std::invalid_argument("PooledModelSmoother: input dimension mismatch");
  }
  const int n = m.input_dim();
  const long q = pool_->config().q;
  const long blocks = (q + kBlock - 1) / kBlock;
  const int last = m.layer_count() - 1;
  const double beta = m.beta;

  Eigen::Map<const Eigen::VectorXd> xv(x.data(), n);
  const Eigen::VectorXd first_pre = m.weights.front() * xv + m.biases.front();

  std::vector<Eigen::VectorXd> block_sums(blocks);
  parallel_for(
      static_cast<std::size_t>(blocks),
      [&](std::size_t b) {
        const long start = static_cast<long>(b) * kBlock;
        const long count = std::min<long>(kBlock, q - start);

        // Layer 0 preactivations from the cached projection.
        Eigen::MatrixXd u = first_layer_eps_.middleCols(start, count).colwise() + first_pre;
        std::vector<Eigen::MatrixXd> sig(last);
        sig[0] = detail::sigmoid_array(u.array(), beta).matrix();
        Eigen::MatrixXd a = detail::softplus_array(u.array(), beta).matrix();
        for (int l = 1; l < last; ++l) {
          u = (m.weights[l] * a).colwise() + m.biases[l];
          sig[l] = detail::sigmoid_array(u.array(), beta).matrix();
          a = detail::softplus_array(u.array(), beta).matrix();
        }

        Eigen::MatrixXd delta = m.weights[last].row(class_index_).transpose().replicate(1, count);
        for (int l = last - 1; l >= 0; --l) {
          delta = m.weights[l].transpose() * (delta.array() * sig[l].array()).matrix();
        }
        delta = delta.array().abs().matrix();

        std::vector<double> scratch(n);
        for (long c = 0; c < count; ++c) {
          std::span<double> col(delta.col(c).data(), static_cast<std::size_t>(n));
          kernels::apply_inplace(transform_, params_, col, scratch);
        }
        check_output_range(delta);
        block_sums[b] = delta.rowwise().sum();
      },
      max_threads);

  Eigen::VectorXd total = pairwise_reduce(block_sums);
  std::vector<double> mean(n);
  for (int i = 0; i < n; ++i) mean[i] = total[i] / static_cast<double>(q);
  return mean;
}

}  // namespace certsal
