#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace certsal {

struct TinyModel;

enum class Transform { raw, scaled, quadratic, sparsified, relaxed };

const char* to_string(Transform t);
Transform transform_from_string(std::string_view name);

// tau controls the sparsified fraction, gamma the clipped-to-one fraction.
struct SparsifyParams {
  double tau = 1.0;
  double gamma = 0.0;

  void validate() const;  // 0 < tau <= 1, 0 <= gamma <= tau
};

// Per-feature importance scores in [0,1] plus the transform that made them.
struct SaliencyVector {
  std::vector<double> values;
  Transform transform = Transform::raw;
  SparsifyParams params{};
};

// ceil(k) with a small guard against floating-point drift in products like
// tau * n (e.g. 0.3 * 10 evaluating to 3.0000000000000004).
long ceil_index(double k);

// |d f_class / d x_i| for all i. class_index < 0 selects the model's
// predicted class at x.
std::vector<double> gradient_magnitudes(const TinyModel& model, std::span<const double> x,
                                        int class_index = -1);

// v / max(v). All-zero input maps to all zeros rather than erroring, since
// degenerate saturated inputs occur in practice.
SaliencyVector scale_unit(std::vector<double> v);

// scale_unit of the elementwise square.
SaliencyVector quadratic_map(std::vector<double> v);

// Binary map: 1 where v_i >= (ceil(tau*n))-th largest value, else 0. Ties at
// the threshold all map to 1, so the ones count can exceed ceil(tau*n).
SaliencyVector sparsify(std::span<const double> v, const SparsifyParams& params);

// Three-branch map: 0 below the tau threshold, 1 at or above the gamma
// threshold, v_i / v_[ceil(gamma*n)] in between. gamma = 0 divides by the
// maximum (the gamma index is clamped to 1), which makes gamma -> 0 degrade
// to a sparsified-tail version of scale_unit.
SaliencyVector relaxed_sparsify(std::span<const double> v, const SparsifyParams& params);

SaliencyVector apply_transform(Transform t, const SparsifyParams& params, std::vector<double> magnitudes);

// Ordinal rank of v[i], 1 = largest. Ties broken by ascending index so that
// results are reproducible.
int rank_of(std::span<const double> v, int i);

// Rank of every element at once (same convention), into ranks[0..n).
void rank_all(std::span<const double> v, std::span<int> ranks);

// Value of the ceil(k)-th largest element, duplicates counted separately.
double kth_largest(std::span<const double> v, double k);

// Indices of the k largest values under the rank_of tie convention.
std::vector<int> topk_indices(std::span<const double> v, int k);

// Allocation-free transform kernels for the smoothing hot paths. `scratch`
// must have the same length as v.
namespace kernels {
void scale_unit_inplace(std::span<double> v);
void quadratic_inplace(std::span<double> v);
void sparsify_inplace(std::span<double> v, double tau, std::span<double> scratch);
void relaxed_inplace(std::span<double> v, double tau, double gamma, std::span<double> scratch);
void apply_inplace(Transform t, const SparsifyParams& params, std::span<double> v,
                   std::span<double> scratch);

// Exact k-th largest (1-based) with a pivot hint from a statistically similar
// vector (e.g. the previous smoothing sample): one counting pass usually
// settles it, otherwise a small nth_element on the matching partition.
double kth_largest_hinted(std::span<const double> v, long k, double hint,
                          std::span<double> scratch);
}  // namespace kernels

}  // namespace certsal
