#include "certsal/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace certsal {

namespace {

void check_consistent(const SmoothedSaliency& s, const CertificateParams& params) {
  params.validate();
  if (params.q != s.config.q) {
    throw std::invalid_argument("certificates: params.q != smoothing q (" +
                                std::to_string(params.q) + " vs " + std::to_string(s.config.q) + ")");
  }
  if (params.sigma != s.config.sigma) {
    throw std::invalid_argument("certificates: params.sigma != smoothing sigma");
  }
  if (params.n != static_cast<long>(s.mean.size())) {
    throw std::invalid_argument("certificates: params.n != saliency length");
  }
}

// Descending copy of the smoothed values.
std::vector<double> sorted_desc(const std::vector<double>& v) {
  std::vector<double> out(v);
  std::sort(out.begin(), out.end(), std::greater<double>());
  return out;
}

}  // namespace

int topk_overlap(std::span<const double> a, std::span<const double> b, int k) {
  if (a.size() != b.size()) throw std::invalid_argument("topk_overlap: length mismatch");
  const std::vector<int> ta = topk_indices(a, k);
  const std::vector<int> tb = topk_indices(b, k);
  std::vector<char> in_a(a.size(), 0);
  for (int i : ta) in_a[i] = 1;
  int overlap = 0;
  for (int i : tb) overlap += in_a[i];
  return overlap;
}

bool pairwise_certified(const SmoothedSaliency& s, int i, int j, const CertificateParams& params) {
  check_consistent(s, params);
  const int n = static_cast<int>(s.mean.size());
  if (i < 0 || i >= n || j < 0 || j >= n) {
    throw std::out_of_range("pairwise_certified: index out of range");
  }
  return empirical_floor_fn(s.mean[i], params) >= s.mean[j];
}

CertificateReport topk_certificate(const SmoothedSaliency& s, int k,
                                   const CertificateParams& params) {
  check_consistent(s, params);
  const long n = static_cast<long>(s.mean.size());
  if (k < 1 || k > n) throw std::out_of_range("topk_certificate: K out of range");

  const std::vector<double> desc = sorted_desc(s.mean);
  CertificateReport report;
  report.k = k;
  report.params = params;
  report.margin_c = hoeffding_margin(params);
  report.gap_profile.reserve(k);

  // Linear scan: qualification at i is tested independently for each i <= K.
  for (int i = 1; i <= k; ++i) {
    const long j = 2L * k - i;
    const double rival = (j > n) ? 0.0 : desc[j - 1];
    const double gap = empirical_floor_fn(desc[i - 1], params) - rival;
    report.gap_profile.emplace_back(i, gap);
    if (gap >= 0.0) report.r_cert = i;
  }
  return report;
}

RankCertificate rank_certificate(const SmoothedSaliency& s, int i,
                                 const CertificateParams& params) {
  check_consistent(s, params);
  const long n = static_cast<long>(s.mean.size());
  if (i < 0 || i >= n) throw std::out_of_range("rank_certificate: index out of range");

  const std::vector<double> desc = sorted_desc(s.mean);
  const double floor_value = empirical_floor_fn(s.mean[i], params);

  RankCertificate cert;
  cert.index = i;
  if (floor_value < desc[n - 1]) return cert;  // even k = n fails: uncertified

  // desc is nonincreasing, so {k : floor >= desc[k-1]} is an upper set;
  // binary search for its smallest element.
  long lo = 1, hi = n;
  while (lo < hi) {
    const long mid = (lo + hi) / 2;
    if (floor_value >= desc[mid - 1]) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  cert.certified_rank = lo;
  return cert;
}

std::optional<long> median_rank_bound(long median_rank, double tau,
                                      const CertificateParams& params) {
  params.validate();
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("median_rank_bound: tau in (0,1]");
  const long threshold = std::clamp(ceil_index(tau * static_cast<double>(params.n)), 1L, params.n);
  if (median_rank > threshold) return std::nullopt;  // premise unmet
  const double denom = empirical_floor_fn(0.5, params);
  if (denom <= 0.0) return std::nullopt;
  const long bound = ceil_index(static_cast<double>(threshold) / denom);
  return std::min(bound, params.n);
}

std::optional<long> general_rank_bound(std::span<const double> rank_value_profile, long T,
                                       const CertificateParams& params) {
  params.validate();
  const long n = static_cast<long>(rank_value_profile.size());
  if (T < 1 || T > n) throw std::out_of_range("general_rank_bound: T out of range");
  double sum = 0.0;
  for (long j = 0; j < n; ++j) {
    if (rank_value_profile[j] < 0.0) {
      throw std::invalid_argument("general_rank_bound: profile must be nonnegative");
    }
    if (j > 0 && rank_value_profile[j] > rank_value_profile[j - 1]) {
      throw std::invalid_argument("general_rank_bound: profile must be nonincreasing");
    }
    sum += rank_value_profile[j];
  }
  const double denom = empirical_floor_fn(rank_value_profile[T - 1] / 2.0, params);
  if (denom <= 0.0) return std::nullopt;
  const long bound = ceil_index(sum / denom);
  return std::min(bound, n);
}

}  // namespace certsal
