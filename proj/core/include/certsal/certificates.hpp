#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "certsal/numerics.hpp"
#include "certsal/smoothing.hpp"

namespace certsal {

// Top-K overlap certificate for one input. gap_profile[i-1] holds
// (i, L^(h~_[i]) - h~_[2K-i]) for i = 1..K, with h~_[j] taken as 0 for j > n
// (those comparisons hold automatically by counting). All certificates in a
// report hold jointly with probability >= p: the margin c already unions the
// Hoeffding bound over all n coordinates.
struct CertificateReport {
  int r_cert = 0;
  int k = 0;
  CertificateParams params{};
  double margin_c = 0.0;
  std::vector<std::pair<int, double>> gap_profile;
};

struct RankCertificate {
  int index = 0;
  std::optional<long> certified_rank;  // nullopt = uncertified
};

// |topK(a) cap topK(b)| under the rank_of tie convention.
int topk_overlap(std::span<const double> a, std::span<const double> b, int k);

// L^(h~_i) >= h~_j: element i provably stays at least as large as element j
// for any perturbation within the radius.
// Throws std::invalid_argument when params disagree with s.config.
bool pairwise_certified(const SmoothedSaliency& s, int i, int j, const CertificateParams& params);

// R_cert = max{ i <= K : L^(h~_[i]) >= h~_[2K-i] }, 0 when no i qualifies.
CertificateReport topk_certificate(const SmoothedSaliency& s, int k,
                                   const CertificateParams& params);

// Smallest k with L^(h~_i) >= h~_[k]; uncertified when even k = n fails.
RankCertificate rank_certificate(const SmoothedSaliency& s, int i, const CertificateParams& params);

// Median-rank bound: if the median per-sample rank of an element is at most
// ceil(tau*n), its certified rank is at most ceil(tau*n) / L^(1/2) (capped at
// n). nullopt = premise unmet or L^(1/2) = 0 (no guarantee).
std::optional<long> median_rank_bound(long median_rank, double tau, const CertificateParams& params);

// General rank bound for any nonincreasing nonnegative value-per-rank profile
// f(1..n): sum_j f(j) / L^(f(T)/2), capped at n. nullopt when L^(f(T)/2) = 0.
// Throws std::invalid_argument if the profile is not nonincreasing.
std::optional<long> general_rank_bound(std::span<const double> rank_value_profile, long T,
                                       const CertificateParams& params);

}  // namespace certsal
