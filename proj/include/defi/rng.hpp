#pragma once
// Deterministic, platform-independent random numbers: xoshiro256++ state
// seeded through splitmix64.  split(k) derives an independent child stream
// from (seed, k), so simulation replicates and the X/Y noise sources inside a
// replicate never share a stream.
#include <array>
#include <cstdint>

namespace defi {

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Child generator for stream index k; reproducible function of (seed, k).
  Rng split(std::uint64_t k) const;

  std::uint64_t next_u64();

  // Strictly inside (0, 1): ((x >> 11) + 0.5) * 2^-53.
  double uniform();
  double uniform(double lo, double hi);

  // Inverse-CDF transform, so a normal draw consumes exactly one uniform.
  double normal();

  // Mean-1 exponential.
  double exponential();

  bool bernoulli(double p);

  // Product-of-uniforms inversion below mean 10, Hormann's PTRS transformed
  // rejection above; both are exact for the given mean.
  long poisson(double mean);

  double chi_squared_1();

  std::uint64_t seed() const { return seed_; }

 private:
  std::array<std::uint64_t, 4> s_;
  std::uint64_t seed_;
};

}  // namespace defi
