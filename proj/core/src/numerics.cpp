#include "certsal/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace certsal {

void CertificateParams::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("CertificateParams: sigma must be > 0");
  if (q < 1) throw std::invalid_argument("CertificateParams: q must be >= 1");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("CertificateParams: p must be in (0,1)");
  if (n < 1) throw std::invalid_argument("CertificateParams: n must be >= 1");
  if (!(rho >= 0.0)) throw std::invalid_argument("CertificateParams: rho must be >= 0");
}

double std_normal_cdf(double z) {
  // erfc underflows gracefully, so the tails saturate to exactly 0/1.
  return 0.5 * std::erfc(-z * M_SQRT1_2);
}

double std_normal_pdf(double z) {
  static const double kInvSqrt2Pi = 0.3989422804014326779399461;
  return kInvSqrt2Pi * std::exp(-0.5 * z * z);
}

namespace {

// Acklam's rational approximation to the normal quantile, max relative error
// about 1.15e-9 over (0,1).
double inv_cdf_estimate(double p) {
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;

  if (p < p_low) {
    const double r = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
           ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double r = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
           ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double std_normal_inv_cdf(double p) {
  if (!(p > 0.0) || !(p < 1.0)) {
    throw std::domain_error("std_normal_inv_cdf: p must be in (0,1), got " + std::to_string(p));
  }
  double x = inv_cdf_estimate(p);
  // One Newton step against the erfc-based CDF. Certificate values sit in the
  // CDF tail where the raw approximation would distort gaps.
  const double density = std_normal_pdf(x);
  if (density > 1e-300) {
    x -= (std_normal_cdf(x) - p) / density;
  }
  return x;
}

double hoeffding_margin(const CertificateParams& params) {
  params.validate();
  const double n = static_cast<double>(params.n);
  const double q = static_cast<double>(params.q);
  return std::sqrt(std::log(2.0 * n / (1.0 - params.p)) / (2.0 * q));
}

double floor_fn(double z, const CertificateParams& params) {
  params.validate();
  if (z <= 0.0) return 0.0;
  if (params.rho == 0.0) return std::min(z, 1.0);
  const double zz = std::min(z, 1.0 - kInvCdfGuard);
  return std_normal_cdf(std_normal_inv_cdf(zz) - params.shift());
}

double empirical_floor_fn(double z, const CertificateParams& params) {
  params.validate();
  const double c = hoeffding_margin(params);
  const double zc = z - c;
  if (zc <= 0.0) return 0.0;
  const double zz = std::min(zc, 1.0 - kInvCdfGuard);
  const double v = std_normal_cdf(std_normal_inv_cdf(zz) - params.shift()) - c;
  return std::clamp(v, 0.0, 1.0);
}

}  // namespace certsal
