#include "defi/rng.hpp"

#include <cmath>
#include <string>

#include "defi/errors.hpp"
#include "defi/prob.hpp"

namespace defi {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += kGolden);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

// Seed for child stream k: two splitmix64 rounds over seed ^ (k+1)*golden.
std::uint64_t child_seed(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t st = seed ^ ((k + 1) * kGolden);
  splitmix64(st);
  return splitmix64(st);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t st = seed;
  for (auto& word : s_) word = splitmix64(st);
}

Rng Rng::split(std::uint64_t k) const { return Rng(child_seed(seed_, k)); }

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() { return prob::normal_quantile(uniform()); }

double Rng::exponential() { return -std::log(uniform()); }

bool Rng::bernoulli(double p) {
  if (!(p >= 0.0 && p <= 1.0))
    throw ValidationError("bernoulli requires p in [0, 1], got " + std::to_string(p));
  return uniform() < p;
}

long Rng::poisson(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean))
    throw ValidationError("poisson requires a finite nonnegative mean");
  if (mean == 0.0) return 0;
  if (mean < 10.0) {
    // Knuth inversion by multiplying uniforms until the product drops
    // below exp(-mean).
    const double threshold = std::exp(-mean);
    long k = 0;
    double prod = uniform();
    while (prod > threshold) {
      ++k;
      prod *= uniform();
    }
    return k;
  }
  // Hormann (1993) PTRS: transformed rejection with squeeze, O(1) per draw
  // for any large mean.
  const double b = 0.931 + 2.53 * std::sqrt(mean);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  const double log_mean = std::log(mean);
  for (;;) {
    const double u = uniform() - 0.5;
    const double v = uniform();
    const double us = 0.5 - std::fabs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<long>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
        k * log_mean - mean - std::lgamma(k + 1.0))
      return static_cast<long>(k);
  }
}

double Rng::chi_squared_1() {
  const double z = normal();
  return z * z;
}

}  // namespace defi
