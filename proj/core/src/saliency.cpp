#include "certsal/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "certsal/nn.hpp"

namespace certsal {

const char* to_string(Transform t) {
  switch (t) {
    case Transform::raw: return "raw";
    case Transform::scaled: return "scaled";
    case Transform::quadratic: return "quadratic";
    case Transform::sparsified: return "sparsified";
    case Transform::relaxed: return "relaxed";
  }
  return "?";
}

Transform transform_from_string(std::string_view name) {
  if (name == "raw") return Transform::raw;
  if (name == "scaled") return Transform::scaled;
  if (name == "quadratic") return Transform::quadratic;
  if (name == "sparsified") return Transform::sparsified;
  if (name == "relaxed") return Transform::relaxed;
  throw std::invalid_argument("unknown transform: " + std::string(name));
}

void SparsifyParams::validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("SparsifyParams: tau must be in (0,1]");
  if (!(gamma >= 0.0 && gamma <= tau)) throw std::invalid_argument("SparsifyParams: gamma must be in [0,tau]");
}

long ceil_index(double k) {
  return static_cast<long>(std::ceil(k - 1e-9));
}

std::vector<double> gradient_magnitudes(const TinyModel& model, std::span<const double> x,
                                        int class_index) {
  if (static_cast<int>(x.size()) != model.input_dim()) {
    throw std::invalid_argument("gradient_magnitudes: input dimension mismatch");
  }
  if (class_index < 0) class_index = predict_class(model, x);
  Eigen::VectorXd g = input_gradient(model, x, class_index);
  std::vector<double> out(g.size());
  for (long i = 0; i < g.size(); ++i) out[i] = std::abs(g[i]);
  return out;
}

SaliencyVector scale_unit(std::vector<double> v) {
  const double m = v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
  if (m > 0.0) {
    for (double& x : v) x /= m;
  }
  return SaliencyVector{std::move(v), Transform::scaled, {}};
}

SaliencyVector quadratic_map(std::vector<double> v) {
  for (double& x : v) x *= x;
  SaliencyVector s = scale_unit(std::move(v));
  s.transform = Transform::quadratic;
  return s;
}

SaliencyVector sparsify(std::span<const double> v, const SparsifyParams& params) {
  params.validate();
  if (v.empty()) throw std::invalid_argument("sparsify: empty input");
  std::vector<double> out(v.begin(), v.end());
  std::vector<double> scratch(v.size());
  kernels::sparsify_inplace(out, params.tau, scratch);
  return SaliencyVector{std::move(out), Transform::sparsified, params};
}

SaliencyVector relaxed_sparsify(std::span<const double> v, const SparsifyParams& params) {
  params.validate();
  if (v.empty()) throw std::invalid_argument("relaxed_sparsify: empty input");
  std::vector<double> out(v.begin(), v.end());
  std::vector<double> scratch(v.size());
  kernels::relaxed_inplace(out, params.tau, params.gamma, scratch);
  return SaliencyVector{std::move(out), Transform::relaxed, params};
}

SaliencyVector apply_transform(Transform t, const SparsifyParams& params,
                               std::vector<double> magnitudes) {
  switch (t) {
    case Transform::raw: {
      return SaliencyVector{std::move(magnitudes), Transform::raw, {}};
    }
    case Transform::scaled: return scale_unit(std::move(magnitudes));
    case Transform::quadratic: return quadratic_map(std::move(magnitudes));
    case Transform::sparsified: return sparsify(magnitudes, params);
    case Transform::relaxed: return relaxed_sparsify(magnitudes, params);
  }
  throw std::logic_error("apply_transform: bad transform");
}

int rank_of(std::span<const double> v, int i) {
  if (i < 0 || i >= static_cast<int>(v.size())) {
    throw std::out_of_range("rank_of: index out of bounds");
  }
  int rank = 1;
  for (int j = 0; j < static_cast<int>(v.size()); ++j) {
    if (v[j] > v[i] || (v[j] == v[i] && j < i)) ++rank;
  }
  return rank;
}

void rank_all(std::span<const double> v, std::span<int> ranks) {
  const int n = static_cast<int>(v.size());
  if (static_cast<int>(ranks.size()) != n) throw std::invalid_argument("rank_all: size mismatch");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (v[a] != v[b]) return v[a] > v[b];
    return a < b;
  });
  for (int pos = 0; pos < n; ++pos) ranks[order[pos]] = pos + 1;
}

double kth_largest(std::span<const double> v, double k) {
  const long kk = ceil_index(k);
  if (kk < 1 || kk > static_cast<long>(v.size())) {
    throw std::out_of_range("kth_largest: k out of range after ceiling");
  }
  std::vector<double> copy(v.begin(), v.end());
  std::nth_element(copy.begin(), copy.begin() + (kk - 1), copy.end(), std::greater<double>());
  return copy[kk - 1];
}

std::vector<int> topk_indices(std::span<const double> v, int k) {
  const int n = static_cast<int>(v.size());
  if (k < 1 || k > n) throw std::out_of_range("topk_indices: k out of range");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
    if (v[a] != v[b]) return v[a] > v[b];
    return a < b;
  });
  order.resize(k);
  return order;
}

namespace kernels {

void scale_unit_inplace(std::span<double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, x);
  if (m > 0.0) {
    for (double& x : v) x /= m;
  }
}

void quadratic_inplace(std::span<double> v) {
  for (double& x : v) x *= x;
  scale_unit_inplace(v);
}

namespace {

// Threshold value = idx-th largest (1-based), computed in scratch.
double select_threshold(std::span<const double> v, long idx, std::span<double> scratch) {
  std::copy(v.begin(), v.end(), scratch.begin());
  std::nth_element(scratch.begin(), scratch.begin() + (idx - 1), scratch.end(),
                   std::greater<double>());
  return scratch[idx - 1];
}

}  // namespace

void sparsify_inplace(std::span<double> v, double tau, std::span<double> scratch) {
  const long n = static_cast<long>(v.size());
  const long idx = std::clamp(ceil_index(tau * static_cast<double>(n)), 1L, n);
  const double thr = select_threshold(v, idx, scratch);
  for (double& x : v) x = (x >= thr) ? 1.0 : 0.0;
}

void relaxed_inplace(std::span<double> v, double tau, double gamma, std::span<double> scratch) {
  const long n = static_cast<long>(v.size());
  const long idx_tau = std::clamp(ceil_index(tau * static_cast<double>(n)), 1L, n);
  const long idx_gamma = std::clamp(ceil_index(gamma * static_cast<double>(n)), 1L, n);
  std::copy(v.begin(), v.end(), scratch.begin());
  std::nth_element(scratch.begin(), scratch.begin() + (idx_tau - 1), scratch.end(),
                   std::greater<double>());
  const double thr_tau = scratch[idx_tau - 1];
  std::nth_element(scratch.begin(), scratch.begin() + (idx_gamma - 1),
                   scratch.begin() + idx_tau, std::greater<double>());
  const double thr_gamma = scratch[idx_gamma - 1];
  for (double& x : v) {
    if (x < thr_tau) {
      x = 0.0;
    } else if (x >= thr_gamma) {
      x = 1.0;
    } else {
      x = x / thr_gamma;  // thr_gamma > x >= 0 here, so division is safe
    }
  }
}

void apply_inplace(Transform t, const SparsifyParams& params, std::span<double> v,
                   std::span<double> scratch) {
  switch (t) {
    case Transform::raw: return;
    case Transform::scaled: return scale_unit_inplace(v);
    case Transform::quadratic: return quadratic_inplace(v);
    case Transform::sparsified: return sparsify_inplace(v, params.tau, scratch);
    case Transform::relaxed: return relaxed_inplace(v, params.tau, params.gamma, scratch);
  }
}

double kth_largest_hinted(std::span<const double> v, long k, double hint,
                          std::span<double> scratch) {
  const long n = static_cast<long>(v.size());
  long count_ge = 0;
  for (long i = 0; i < n; ++i) count_ge += v[i] >= hint;
  if (count_ge == k) {
    // The k-th largest is the smallest element of the >= partition.
    double result = std::numeric_limits<double>::infinity();
    for (long i = 0; i < n; ++i) {
      if (v[i] >= hint) result = std::min(result, v[i]);
    }
    return result;
  }
  long m = 0;
  if (count_ge > k) {
    for (long i = 0; i < n; ++i) {
      if (v[i] >= hint) scratch[m++] = v[i];
    }
    std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.begin() + m,
                     std::greater<double>());
    return scratch[k - 1];
  }
  for (long i = 0; i < n; ++i) {
    if (v[i] < hint) scratch[m++] = v[i];
  }
  const long k2 = k - count_ge;
  std::nth_element(scratch.begin(), scratch.begin() + (k2 - 1), scratch.begin() + m,
                   std::greater<double>());
  return scratch[k2 - 1];
}

}  // namespace kernels

}  // namespace certsal
