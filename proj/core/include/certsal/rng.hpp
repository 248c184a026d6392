#pragma once

#include <cstdint>
#include <span>

namespace certsal {

// Fixed-increment SplitMix64 (Steele, Lea & Flood). Small state, good mixing,
// and cheap to re-seed per counter, which is what the deterministic parallel
// smoothing paths rely on.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in (0, 1].
  double next_unit() {
    return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

// Sub-stream seed for counter i. Distinct counters give distinct, well-mixed
// seeds, so perturbation i of a run can be regenerated in isolation.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t counter) {
  SplitMix64 g(seed + (counter + 1) * 0x9E3779B97F4A7C15ULL);
  return g.next();
}

// Standard normal draws via Box-Muller over SplitMix64. The algorithm is
// spelled out here (instead of std::normal_distribution) so that sequences
// are identical across standard libraries and runs.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}

  double next();
  void fill(std::span<double> out);

 private:
  SplitMix64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace certsal
