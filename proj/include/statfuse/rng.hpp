#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace statfuse {

// Counter-based deterministic random streams. Every stream is a splitmix64
// sequence whose start state is derived from (seed, stream index), so draws
// for distinct elements are independent of processing order. The algorithm
// and constants are fixed; outputs are identical on any platform.
class Rng {
 public:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Stream keyed by a seed and a stream index (e.g. element counter).
  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    return Rng(mix(seed * 0x9E3779B97F4A7C15ull + 0x2545F4914F6CDD1Dull) ^
               mix(index + 0x632BE59BD9B4E019ull));
  }

  explicit Rng(std::uint64_t state) : state_(state) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller.
  double next_normal() {
    double u1 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Gamma(shape, 1) via Marsaglia-Tsang, boosted for shape < 1.
  double next_gamma(double shape) {
    if (shape < 1.0) {
      const double u = next_double();
      return next_gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = next_normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = next_double();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  /// Dirichlet(alpha) draw via normalized gamma variates.
  void next_dirichlet(std::span<const double> alpha, std::span<double> out) {
    double sum = 0.0;
    for (std::size_t j = 0; j < alpha.size(); ++j) {
      out[j] = next_gamma(alpha[j]);
      sum += out[j];
    }
    for (std::size_t j = 0; j < alpha.size(); ++j) out[j] /= sum;
  }

  /// Categorical draw by inverse CDF over unnormalized weights.
  int next_categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = next_double() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      u -= weights[i];
      if (u < 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

 private:
  std::uint64_t state_;
};

}  // namespace statfuse
