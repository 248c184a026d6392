#include "certsal/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "certsal/rng.hpp"

namespace certsal {

std::vector<int> TinyModel::layer_sizes() const {
  std::vector<int> sizes;
  if (weights.empty()) return sizes;
  sizes.push_back(static_cast<int>(weights.front().cols()));
  for (const auto& w : weights) sizes.push_back(static_cast<int>(w.rows()));
  return sizes;
}

void TinyModel::validate() const {
  if (weights.empty() || weights.size() != biases.size()) {
    throw std::invalid_argument("TinyModel: empty or mismatched layer lists");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (biases[l].size() != weights[l].rows()) {
      throw std::invalid_argument("TinyModel: bias size mismatch at layer " + std::to_string(l));
    }
    if (l + 1 < weights.size() && weights[l + 1].cols() != weights[l].rows()) {
      throw std::invalid_argument("TinyModel: layer dimension mismatch at layer " +
                                  std::to_string(l));
    }
    if (!weights[l].allFinite() || !biases[l].allFinite()) {
      throw std::invalid_argument("TinyModel: non-finite parameters at layer " + std::to_string(l));
    }
  }
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("TinyModel: beta must be positive and finite");
  }
}

double softplus(double u, double beta) {
  const double bu = beta * u;
  if (bu > 30.0) return u;
  if (bu < -30.0) return std::exp(bu) / beta;
  return std::log1p(std::exp(bu)) / beta;
}

double softplus_derivative(double u, double beta) {
  const double bu = beta * u;
  if (bu > 30.0) return 1.0;
  if (bu < -30.0) return std::exp(bu);
  return 1.0 / (1.0 + std::exp(-bu));
}

namespace detail {

Eigen::ArrayXXd softplus_array(const Eigen::ArrayXXd& u, double beta) {
  const Eigen::ArrayXXd bu = beta * u;
  const Eigen::ArrayXXd mid = bu.min(30.0).max(-30.0).exp().log1p() / beta;
  const Eigen::ArrayXXd low = bu.min(0.0).exp() / beta;
  return (bu > 30.0).select(u, (bu < -30.0).select(low, mid));
}

Eigen::ArrayXXd sigmoid_array(const Eigen::ArrayXXd& u, double beta) {
  const Eigen::ArrayXXd bu = beta * u;
  const Eigen::ArrayXXd mid = 1.0 / (1.0 + (-bu.min(30.0).max(-30.0)).exp());
  const Eigen::ArrayXXd low = bu.min(0.0).exp();
  return (bu > 30.0).select(1.0, (bu < -30.0).select(low, mid));
}

}  // namespace detail

namespace {

using detail::sigmoid_array;
using detail::softplus_array;

Eigen::VectorXd to_vector(std::span<const double> x) {
  return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<long>(x.size()));
}

void check_input(const TinyModel& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.input_dim()) {
    throw std::invalid_argument("TinyModel: input dimension mismatch (got " +
                                std::to_string(x.size()) + ", want " +
                                std::to_string(model.input_dim()) + ")");
  }
}

void check_class(const TinyModel& model, int class_index) {
  if (class_index < 0 || class_index >= model.output_dim()) {
    throw std::invalid_argument("TinyModel: class index out of range");
  }
}

}  // namespace

TinyModel make_mlp(const std::vector<int>& sizes, double beta, std::uint64_t seed) {
  if (sizes.size() < 2) throw std::invalid_argument("make_mlp: need at least input and output");
  TinyModel m;
  m.beta = beta;
  GaussianStream rng(mix_seed(seed, 0x1717));
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
    const double scale = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
    for (long i = 0; i < w.rows(); ++i) {
      for (long j = 0; j < w.cols(); ++j) w(i, j) = scale * rng.next();
    }
    m.weights.push_back(std::move(w));
    m.biases.push_back(Eigen::VectorXd::Zero(sizes[l + 1]));
  }
  m.validate();
  return m;
}

Eigen::VectorXd forward(const TinyModel& model, std::span<const double> x) {
  check_input(model, x);
  Eigen::VectorXd a = to_vector(x);
  const int last = model.layer_count() - 1;
  for (int l = 0; l <= last; ++l) {
    Eigen::VectorXd u = model.weights[l] * a + model.biases[l];
    if (l == last) return u;
    a.resize(u.size());
    for (long i = 0; i < u.size(); ++i) a[i] = softplus(u[i], model.beta);
  }
  return a;  // unreachable
}

int predict_class(const TinyModel& model, std::span<const double> x) {
  Eigen::VectorXd logits = forward(model, x);
  int best = 0;
  logits.maxCoeff(&best);
  return best;
}

Eigen::VectorXd input_gradient(const TinyModel& model, std::span<const double> x,
                               int class_index) {
  check_input(model, x);
  check_class(model, class_index);
  const int last = model.layer_count() - 1;

  // Forward, keeping preactivations of the hidden layers.
  std::vector<Eigen::VectorXd> pre(last);
  Eigen::VectorXd a = to_vector(x);
  for (int l = 0; l < last; ++l) {
    pre[l] = model.weights[l] * a + model.biases[l];
    a.resize(pre[l].size());
    for (long i = 0; i < pre[l].size(); ++i) a[i] = softplus(pre[l][i], model.beta);
  }

  // Reverse pass for the chosen logit.
  Eigen::VectorXd delta = model.weights[last].row(class_index).transpose();
  for (int l = last - 1; l >= 0; --l) {
    for (long i = 0; i < delta.size(); ++i) {
      delta[i] *= softplus_derivative(pre[l][i], model.beta);
    }
    delta = (model.weights[l].transpose() * delta).eval();
  }
  return delta;
}

Eigen::VectorXd hessian_vector_product(const TinyModel& model, std::span<const double> x,
                                       int class_index, std::span<const double> v) {
  check_input(model, x);
  check_class(model, class_index);
  if (v.size() != x.size()) throw std::invalid_argument("hessian_vector_product: v size mismatch");
  const int last = model.layer_count() - 1;
  const double beta = model.beta;

  // Forward with tangents: a_dot tracks the directional derivative along v.
  std::vector<Eigen::VectorXd> pre(last), pre_dot(last);
  Eigen::VectorXd a = to_vector(x);
  Eigen::VectorXd a_dot = to_vector(v);
  for (int l = 0; l < last; ++l) {
    pre[l] = model.weights[l] * a + model.biases[l];
    pre_dot[l] = model.weights[l] * a_dot;
    a.resize(pre[l].size());
    a_dot.resize(pre[l].size());
    for (long i = 0; i < pre[l].size(); ++i) {
      a[i] = softplus(pre[l][i], beta);
      a_dot[i] = softplus_derivative(pre[l][i], beta) * pre_dot[l][i];
    }
  }

  // Reverse pass with tangents; product rule at every activation. The tangent
  // of the backpropagated delta is the Hessian-vector product at the input.
  Eigen::VectorXd delta = model.weights[last].row(class_index).transpose();
  Eigen::VectorXd delta_dot = Eigen::VectorXd::Zero(delta.size());
  for (int l = last - 1; l >= 0; --l) {
    for (long i = 0; i < delta.size(); ++i) {
      const double s = softplus_derivative(pre[l][i], beta);
      const double s_dot = beta * s * (1.0 - s) * pre_dot[l][i];
      const double d = delta[i];
      delta[i] = d * s;
      delta_dot[i] = delta_dot[i] * s + d * s_dot;
    }
    delta = (model.weights[l].transpose() * delta).eval();
    delta_dot = (model.weights[l].transpose() * delta_dot).eval();
  }
  return delta_dot;
}

Eigen::VectorXd hessian_vector_product_fd(const TinyModel& model, std::span<const double> x,
                                          int class_index, std::span<const double> v,
                                          double step) {
  check_input(model, x);
  if (v.size() != x.size()) throw std::invalid_argument("hvp_fd: v size mismatch");
  std::vector<double> plus(x.begin(), x.end()), minus(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    plus[i] += step * v[i];
    minus[i] -= step * v[i];
  }
  Eigen::VectorXd gp = input_gradient(model, plus, class_index);
  Eigen::VectorXd gm = input_gradient(model, minus, class_index);
  return (gp - gm) / (2.0 * step);
}

void forward_batch(const TinyModel& model, const Eigen::MatrixXd& xs, Eigen::MatrixXd& logits) {
  if (xs.rows() != model.input_dim()) throw std::invalid_argument("forward_batch: dim mismatch");
  const int last = model.layer_count() - 1;
  Eigen::MatrixXd a = xs;
  for (int l = 0; l <= last; ++l) {
    Eigen::MatrixXd u = (model.weights[l] * a).colwise() + model.biases[l];
    if (l == last) {
      logits = std::move(u);
      return;
    }
    a = softplus_array(u.array(), model.beta).matrix();
  }
}

void input_gradient_batch(const TinyModel& model, const Eigen::MatrixXd& xs, int class_index,
                          Eigen::MatrixXd& grads) {
  if (xs.rows() != model.input_dim()) {
    throw std::invalid_argument("input_gradient_batch: dim mismatch");
  }
  check_class(model, class_index);
  const int last = model.layer_count() - 1;
  const long batch = xs.cols();

  std::vector<Eigen::MatrixXd> sig(last);  // activation derivatives per layer
  Eigen::MatrixXd a = xs;
  for (int l = 0; l < last; ++l) {
    Eigen::MatrixXd u = (model.weights[l] * a).colwise() + model.biases[l];
    sig[l] = sigmoid_array(u.array(), model.beta).matrix();
    a = softplus_array(u.array(), model.beta).matrix();
  }

  Eigen::MatrixXd delta =
      model.weights[last].row(class_index).transpose().replicate(1, batch);
  for (int l = last - 1; l >= 0; --l) {
    delta = model.weights[l].transpose() * (delta.array() * sig[l].array()).matrix();
  }
  grads = std::move(delta);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning rate must be > 0");
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch size must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("TrainConfig: momentum in [0,1)");
}

TrainResult train(TinyModel& model, const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  model.validate();
  dataset.validate();
  if (dataset.dim() != model.input_dim()) {
    throw std::invalid_argument("train: dataset dimension does not match model");
  }
  const long count = dataset.size();
  TrainResult result;
  if (config.epochs == 0 || count == 0) return result;

  const int last = model.layer_count() - 1;
  const double beta = model.beta;
  std::vector<Eigen::MatrixXd> vel_w(model.weights.size());
  std::vector<Eigen::VectorXd> vel_b(model.biases.size());
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    vel_w[l] = Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols());
    vel_b[l] = Eigen::VectorXd::Zero(model.biases[l].size());
  }

  std::vector<long> order(count);
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 shuffle_rng(mix_seed(config.seed, 0x5u));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates with the deterministic stream.
    for (long i = count - 1; i > 0; --i) {
      const long j = static_cast<long>(shuffle_rng.next() % static_cast<std::uint64_t>(i + 1));
      std::swap(order[i], order[j]);
    }

    double loss_sum = 0.0;
    long correct = 0;
    for (long start = 0; start < count; start += config.batch_size) {
      const long b = std::min<long>(config.batch_size, count - start);
      Eigen::MatrixXd X(dataset.dim(), b);
      for (long i = 0; i < b; ++i) X.col(i) = dataset.inputs.col(order[start + i]);

      // Forward, keeping activations.
      std::vector<Eigen::MatrixXd> acts(last + 1);  // acts[l] = input to layer l
      std::vector<Eigen::MatrixXd> sig(last);
      acts[0] = X;
      for (int l = 0; l < last; ++l) {
        Eigen::MatrixXd u = (model.weights[l] * acts[l]).colwise() + model.biases[l];
        sig[l] = sigmoid_array(u.array(), beta).matrix();
        acts[l + 1] = softplus_array(u.array(), beta).matrix();
      }
      Eigen::MatrixXd logits = (model.weights[last] * acts[last]).colwise() + model.biases[last];

      // Softmax cross-entropy.
      Eigen::MatrixXd probs = logits;
      for (long i = 0; i < b; ++i) {
        const double m = probs.col(i).maxCoeff();
        probs.col(i) = (probs.col(i).array() - m).exp();
        probs.col(i) /= probs.col(i).sum();
        const int label = dataset.labels[order[start + i]];
        loss_sum += -std::log(std::max(probs(label, i), 1e-300));
        int pred = 0;
        logits.col(i).maxCoeff(&pred);
        if (pred == label) ++correct;
      }
      Eigen::MatrixXd dlogits = probs;
      for (long i = 0; i < b; ++i) dlogits(dataset.labels[order[start + i]], i) -= 1.0;
      dlogits /= static_cast<double>(b);

      // Backward + SGD with momentum.
      Eigen::MatrixXd delta = dlogits;
      for (int l = last; l >= 0; --l) {
        Eigen::MatrixXd grad_w = delta * acts[l].transpose();
        if (config.weight_decay > 0.0) grad_w += config.weight_decay * model.weights[l];
        Eigen::VectorXd grad_b = delta.rowwise().sum();
        if (l > 0) {
          delta = (model.weights[l].transpose() * delta).eval();
          delta = (delta.array() * sig[l - 1].array()).matrix();
        }
        vel_w[l] = config.momentum * vel_w[l] - config.learning_rate * grad_w;
        vel_b[l] = config.momentum * vel_b[l] - config.learning_rate * grad_b;
        model.weights[l] += vel_w[l];
        model.biases[l] += vel_b[l];
      }
    }
    const double mean_loss = loss_sum / static_cast<double>(count);
    if (!std::isfinite(mean_loss)) {
      throw std::runtime_error("train: loss went non-finite at epoch " + std::to_string(epoch) +
                               "; lower the learning rate");
    }
    result.loss_curve.push_back(mean_loss);
    result.accuracy_curve.push_back(static_cast<double>(correct) / static_cast<double>(count));
  }
  result.final_accuracy = result.accuracy_curve.back();
  return result;
}

namespace {

constexpr char kCkptMagic[4] = {'C', 'S', 'L', 'M'};
constexpr std::uint32_t kCkptVersion = 1;
constexpr std::uint32_t kEndianTag = 0x01020304;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error(path + ": truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const TinyModel& model, const std::string& path) {
  model.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(kCkptMagic, 4);
  write_pod(out, kCkptVersion);
  write_pod(out, kEndianTag);
  write_pod(out, model.beta);
  const std::vector<int> sizes = model.layer_sizes();
  write_pod(out, static_cast<std::uint32_t>(sizes.size()));
  for (int s : sizes) write_pod(out, static_cast<std::uint32_t>(s));
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    // Row-major so the layout is independent of Eigen's default ordering.
    for (long i = 0; i < model.weights[l].rows(); ++i) {
      for (long j = 0; j < model.weights[l].cols(); ++j) write_pod(out, model.weights[l](i, j));
    }
    for (long i = 0; i < model.biases[l].size(); ++i) write_pod(out, model.biases[l][i]);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

TinyModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCkptMagic, 4) != 0) {
    throw std::runtime_error(path + ": not a model checkpoint (bad magic)");
  }
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kCkptVersion) {
    throw std::runtime_error(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto endian = read_pod<std::uint32_t>(in, path);
  if (endian != kEndianTag) {
    throw std::runtime_error(path + ": endianness mismatch (checkpoint written on a different platform)");
  }
  TinyModel m;
  m.beta = read_pod<double>(in, path);
  const auto n_sizes = read_pod<std::uint32_t>(in, path);
  if (n_sizes < 2 || n_sizes > 64) throw std::runtime_error(path + ": implausible layer count");
  std::vector<int> sizes(n_sizes);
  for (auto& s : sizes) s = static_cast<int>(read_pod<std::uint32_t>(in, path));
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
    for (long i = 0; i < w.rows(); ++i) {
      for (long j = 0; j < w.cols(); ++j) w(i, j) = read_pod<double>(in, path);
    }
    Eigen::VectorXd b(sizes[l + 1]);
    for (long i = 0; i < b.size(); ++i) b[i] = read_pod<double>(in, path);
    m.weights.push_back(std::move(w));
    m.biases.push_back(std::move(b));
  }
  m.validate();
  return m;
}

}  // namespace certsal
