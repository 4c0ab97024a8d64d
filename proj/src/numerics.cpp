#include "statfuse/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace statfuse::numerics {

namespace {

constexpr double kEulerGamma = 0.57721566490153286060651209008240243;

// Lanczos approximation, g = 7, 9 coefficients.
constexpr double kLanczos[9] = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};

double ln_gamma_lanczos(double x) {
  // valid for x >= 0.5
  const double g = 7.0;
  double a = kLanczos[0];
  const double t = x + g - 0.5;
  for (int i = 1; i < 9; ++i) a += kLanczos[i] / (x - 1.0 + i);
  return 0.5 * std::log(2.0 * std::numbers::pi) + (x - 0.5) * std::log(t) -
         t + std::log(a);
}

double ln_gamma_stirling(double x) {
  // asymptotic series, accurate for x >= 10
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double series = inv *
                  (1.0 / 12.0 +
                   inv2 * (-1.0 / 360.0 +
                           inv2 * (1.0 / 1260.0 +
                                   inv2 * (-1.0 / 1680.0 +
                                           inv2 * (1.0 / 1188.0)))));
  return (x - 0.5) * std::log(x) - x +
         0.5 * std::log(2.0 * std::numbers::pi) + series;
}

}  // namespace

double ln_gamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("ln_gamma: x must be > 0");
  if (x >= 10.0) return ln_gamma_stirling(x);
  if (x >= 0.5) return ln_gamma_lanczos(x);
  // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
  return std::log(std::numbers::pi / std::sin(std::numbers::pi * x)) -
         ln_gamma_lanczos(1.0 - x);
}

double digamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("digamma: x must be > 0");
  double result = 0.0;
  while (x < 6.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 +
                    inv2 * (-1.0 / 120.0 +
                            inv2 * (1.0 / 252.0 +
                                    inv2 * (-1.0 / 240.0 +
                                            inv2 * (1.0 / 132.0)))));
  return result;
}

double trigamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("trigamma: x must be > 0");
  double result = 0.0;
  while (x < 6.0) {
    result += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += inv * (1.0 +
                   inv * (0.5 +
                          inv * (1.0 / 6.0 +
                                 inv2 * (-1.0 / 30.0 +
                                         inv2 * (1.0 / 42.0 +
                                                 inv2 * (-1.0 / 30.0))))));
  return result;
}

double inv_digamma(double y) {
  if (!std::isfinite(y)) throw std::domain_error("inv_digamma: y must be finite");
  // Minka's initialization
  double x = (y >= -2.22) ? std::exp(y) + 0.5 : -1.0 / (y + kEulerGamma);
  for (int i = 0; i < 12; ++i) {
    const double step = (digamma(x) - y) / trigamma(x);
    double next = x - step;
    if (next <= 0.0) next = x * 0.5;  // stay in the domain
    x = next;
    if (std::abs(step) < 1e-14 * std::max(1.0, std::abs(x)) && i >= 4) break;
  }
  return x;
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) throw std::domain_error("log_sum_exp: empty input");
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - m);
  return m + std::log(sum);
}

}  // namespace statfuse::numerics
