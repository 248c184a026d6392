#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "certsal/data.hpp"

namespace certsal {

// Fully connected classifier with softplus hidden activations (sharpness
// beta) and a linear output layer. Softplus keeps the class scores twice
// differentiable, which the saliency gradients and the attack need.
struct TinyModel {
  std::vector<Eigen::MatrixXd> weights;  // weights[l] is (out x in)
  std::vector<Eigen::VectorXd> biases;
  double beta = 1.0;

  int input_dim() const { return weights.empty() ? 0 : static_cast<int>(weights.front().cols()); }
  int output_dim() const { return weights.empty() ? 0 : static_cast<int>(weights.back().rows()); }
  int layer_count() const { return static_cast<int>(weights.size()); }
  std::vector<int> layer_sizes() const;
  void validate() const;  // dimension compatibility + finite parameters
};

// Overflow-safe softplus ln(1 + e^(beta u)) / beta and its derivative
// (the logistic sigmoid of beta u).
double softplus(double u, double beta);
double softplus_derivative(double u, double beta);

// Random init with 1/sqrt(fan_in)-scaled Gaussian weights.
TinyModel make_mlp(const std::vector<int>& sizes, double beta, std::uint64_t seed);

Eigen::VectorXd forward(const TinyModel& model, std::span<const double> x);
int predict_class(const TinyModel& model, std::span<const double> x);

// Exact reverse-mode derivative of the chosen logit w.r.t. the input.
Eigen::VectorXd input_gradient(const TinyModel& model, std::span<const double> x, int class_index);

// H v for H the input Hessian of the chosen logit, computed as the forward
// directional derivative of the reverse-mode gradient along v (exact, not a
// finite difference).
Eigen::VectorXd hessian_vector_product(const TinyModel& model, std::span<const double> x,
                                       int class_index, std::span<const double> v);

// Finite-difference HVP fallback for cross-validation (central difference of
// gradients, step h).
Eigen::VectorXd hessian_vector_product_fd(const TinyModel& model, std::span<const double> x,
                                          int class_index, std::span<const double> v,
                                          double step = 1e-3);

// Column-per-sample batch paths used by the smoothing and attack internals.
void forward_batch(const TinyModel& model, const Eigen::MatrixXd& xs, Eigen::MatrixXd& logits);
void input_gradient_batch(const TinyModel& model, const Eigen::MatrixXd& xs, int class_index,
                          Eigen::MatrixXd& grads);

namespace detail {
// Batch activations, branch-for-branch identical to the scalar ops.
Eigen::ArrayXXd softplus_array(const Eigen::ArrayXXd& u, double beta);
Eigen::ArrayXXd sigmoid_array(const Eigen::ArrayXXd& u, double beta);
}  // namespace detail

struct TrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  int epochs = 30;
  int batch_size = 64;
  double weight_decay = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainResult {
  std::vector<double> loss_curve;      // mean cross-entropy per epoch
  std::vector<double> accuracy_curve;  // training accuracy per epoch
  double final_accuracy = 0.0;
};

// Softmax cross-entropy SGD with momentum. Deterministic given the seed;
// single-threaded. Throws std::runtime_error if the loss goes non-finite.
TrainResult train(TinyModel& model, const Dataset& dataset, const TrainConfig& config);

// Checkpoint I/O. Binary layout (version 1, see README):
//   magic "CSLM", u32 version, u32 endianness tag 0x01020304, f64 beta,
//   u32 layer-size count, u32 sizes[...], then per layer row-major f64
//   weights followed by f64 biases.
void save_checkpoint(const TinyModel& model, const std::string& path);
TinyModel load_checkpoint(const std::string& path);

}  // namespace certsal
