#pragma once

#include <array>
#include <cstdint>

namespace walltherm {

// Deterministic xoshiro256++ generator seeded through splitmix64.
// All sampling used by the toolkit goes through this class so that runs are
// reproducible across platforms and independent of the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform01();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller (pairs are cached).
  double normal();
  double normal(double mean, double stddev);
  // Normal(mean, stddev) restricted to [lo, hi]. Rejection sampling with an
  // inverse-CDF fallback when the acceptance region is far in the tails.
  double truncated_normal(double mean, double stddev, double lo, double hi);

  // Independent stream derived from the original seed and `stream`; does not
  // consume state from this generator.
  Rng child(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_ = 0;
  std::array<std::uint64_t, 4> state_{};
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

// Standard normal CDF and its inverse (Acklam's approximation polished with
// one Newton step); exposed for tests and the truncated-normal fallback.
double normal_cdf(double x);
double normal_quantile(double p);

}  // namespace walltherm
