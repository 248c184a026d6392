#pragma once

#include <cstdint>

namespace certsal {

// Parameters of a smoothing certificate: L2 attack radius rho, smoothing
// standard deviation sigma (same units as the input features), perturbation
// count q, probability bound p and input dimension n.
struct CertificateParams {
  double rho = 0.0;
  double sigma = 1.0;
  long q = 1;
  double p = 0.95;
  long n = 1;

  // Throws std::invalid_argument on a violated invariant.
  void validate() const;

  double shift() const { return 2.0 * rho / sigma; }
};

// Argument guard for the inverse CDF; keeps the floor functions total at the
// z = 1 boundary while perturbing results far below test tolerances.
inline constexpr double kInvCdfGuard = 1e-15;

// Phi(z), the standard normal CDF. Absolute error below 1e-12; saturates to
// 0/1 in the extreme tails instead of erroring.
double std_normal_cdf(double z);

// Standard normal density.
double std_normal_pdf(double z);

// Phi^-1(p) for p in (0, 1). Rational approximation (max relative error
// ~1.15e-9) refined by one Newton step against the erfc-based CDF.
// Throws std::domain_error for p <= 0 or p >= 1.
double std_normal_inv_cdf(double p);

// Hoeffding margin c = sqrt(ln(2n/(1-p)) / (2q)). May exceed 1 for small q;
// a margin >= 1 makes the empirical floor vacuous.
double hoeffding_margin(const CertificateParams& params);

// Floor function L(z) = Phi(Phi^-1(z) - 2 rho / sigma).
// z <= 0 returns 0; z >= 1 is evaluated at 1 - kInvCdfGuard (saturation, not
// an error): sparsified saliency maps legitimately contain exact 0s and 1s.
double floor_fn(double z, const CertificateParams& params);

// Empirical floor L^(z) = Phi(Phi^-1(z - c) - 2 rho / sigma) - c, clamped to
// [0, 1]. z - c <= 0 returns 0 (the certificate is uninformative there).
double empirical_floor_fn(double z, const CertificateParams& params);

}  // namespace certsal
