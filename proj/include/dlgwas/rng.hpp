#pragma once
// Deterministic random streams.
//
// Every sampler in the library draws from an Rng seeded through
// derive_seed(master, role, index), so each named stream is a pure function of
// the master seed and adding a new stream never shifts an existing one. The
// distributions are implemented here instead of using <random>'s, whose
// output is implementation-defined.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string_view>

namespace dlgwas {

inline constexpr uint64_t splitmix64_next(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr uint64_t mix64(uint64_t x) {
  uint64_t s = x;
  return splitmix64_next(s);
}

inline constexpr uint64_t fnv1a64(std::string_view text) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Seed for the stream (master, role, index).
inline constexpr uint64_t derive_seed(uint64_t master, std::string_view role, uint64_t index = 0) {
  uint64_t x = mix64(master);
  x = mix64(x ^ fnv1a64(role));
  x = mix64(x ^ (index * 0xD1B54A32D192ED03ULL + 1));
  return x;
}

// xoshiro256** seeded by splitmix64.
class Rng {
 public:
  using result_type = uint64_t;

  explicit Rng(uint64_t seed) {
    uint64_t s = seed;
    for (auto& w : state_) w = splitmix64_next(s);
  }

  Rng(uint64_t master, std::string_view role, uint64_t index = 0)
      : Rng(derive_seed(master, role, index)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next(); }

  uint64_t next() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n) by rejection (unbiased).
  uint64_t below(uint64_t n) {
    const uint64_t limit = max() - max() % n;
    uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % n;
  }

  // Box-Muller; consumes two uniforms per call, no cached spare.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Binomial(2, p) as two Bernoulli trials.
  int binomial2(double p) { return static_cast<int>(bernoulli(p)) + static_cast<int>(bernoulli(p)); }

  // log of a Gamma(shape, rate = 1) variate. Marsaglia-Tsang for shape >= 1,
  // boosted by U^(1/shape) below that. Working in log space keeps tiny shapes
  // (Beta(0.01, 0.01)) from underflowing to zero.
  double log_gamma_variate(double shape) {
    if (shape < 1.0) {
      return log_gamma_variate(shape + 1.0) + std::log(uniform()) / shape;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x;
      double v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return std::log(d * v);
    }
  }

  double gamma(double shape, double rate = 1.0) { return std::exp(log_gamma_variate(shape)) / rate; }

  // InverseGamma(shape, scale): density ∝ x^(-shape-1) exp(-scale/x).
  double inverse_gamma(double shape, double scale) { return scale / std::exp(log_gamma_variate(shape)); }

  double beta(double a, double b) {
    const double la = log_gamma_variate(a);
    const double lb = log_gamma_variate(b);
    return 1.0 / (1.0 + std::exp(lb - la));
  }

 private:
  static constexpr uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t state_[4];
};

// Fisher-Yates with the library's own integer sampler (std::shuffle's draw
// pattern is implementation-defined).
template <typename Container>
void shuffle(Container& items, Rng& rng) {
  const auto n = static_cast<uint64_t>(items.size());
  for (uint64_t i = n; i > 1; --i) {
    const uint64_t j = rng.below(i);
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace dlgwas
