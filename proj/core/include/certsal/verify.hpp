#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "certsal/numerics.hpp"

namespace certsal {

struct SuiteResult {
  std::string name;
  bool passed = false;
  bool informational = false;  // reported but not counted as a failure
  std::string detail;
};

// The empirical floor used when scanning for R_cert; injectable so a
// deliberately broken floor (e.g. flipped shift sign) can be shown to make
// the soundness suite fail.
using FloorFn = std::function<double(double, const CertificateParams&)>;

// Inverse-CDF round trip, floor monotonicity/ordering, margin formula.
SuiteResult numerics_suite(std::uint64_t seed);

// Empirical smoothing of half-space indicators against the closed-form
// Gaussian mean, plus the 1/sigma slope of Phi^-1 of the smoothed value.
SuiteResult halfspace_suite(std::uint64_t seed, long q);

// Fraction of coordinates within the Hoeffding margin of the closed form.
// With a vacuous margin (c >= 1, e.g. q = 1) the check holds trivially and
// the result is downgraded to informational.
SuiteResult hoeffding_suite(std::uint64_t seed, long q);

// Certificate soundness against the exactly-known population smoothing of
// half-space providers: top-K overlap with perturbed population maps must
// reach R_cert, including along directed worst-case-style perturbations.
SuiteResult soundness_suite(std::uint64_t seed, const FloorFn& floor_fn = nullptr);

std::vector<SuiteResult> run_all_suites(std::uint64_t seed, long q);

}  // namespace certsal
