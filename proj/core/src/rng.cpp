#include "certsal/rng.hpp"

#include <cmath>

namespace certsal {

double GaussianStream::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = rng_.next_unit();
  const double u2 = rng_.next_unit();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

void GaussianStream::fill(std::span<double> out) {
  for (double& v : out) v = next();
}

}  // namespace certsal
