#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mlrhar {

// splitmix64: cheap, well-mixed stream splitter. Used to derive independent
// engine seeds from (master seed, structured key) tuples so that simulations
// stay reproducible when work is distributed across threads.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d649bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_keys(std::uint64_t seed) { return splitmix64(seed); }

template <typename... Rest>
std::uint64_t mix_keys(std::uint64_t seed, std::uint64_t k, Rest... rest) {
  return mix_keys(splitmix64(seed ^ splitmix64(k + 0x632be59bd9b4e019ULL)), rest...);
}

// Deterministic substream keyed by (seed, k1, k2, ...). Gaussian and Poisson
// draws are hand-rolled (polar Box-Muller, Knuth product method) instead of
// std::*_distribution so that output does not depend on the standard library
// implementation.
class KeyedRng {
 public:
  template <typename... Keys>
  explicit KeyedRng(std::uint64_t seed, Keys... keys) : engine_(mix_keys(seed, static_cast<std::uint64_t>(keys)...)) {}

  // uniform on [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  // Knuth's product method; intended for small means (per-step jump counts).
  int poisson(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mlrhar
