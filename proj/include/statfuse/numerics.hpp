#pragma once

#include <span>

namespace statfuse::numerics {

// Shared lower clip for probabilities before taking logs. Softmax outputs
// stored as float32 can underflow to exact zero.
inline constexpr double kProbClipMin = 1e-10;

/// ln Gamma(x) for x > 0. Throws std::domain_error otherwise.
double ln_gamma(double x);

/// Digamma psi(x) = d/dx ln Gamma(x) for x > 0.
double digamma(double x);

/// Trigamma psi'(x) for x > 0.
double trigamma(double x);

/// Inverse of digamma: returns x > 0 with digamma(x) == y.
double inv_digamma(double y);

/// ln sum_j exp(v_j), overflow-safe. Throws std::domain_error on empty input.
double log_sum_exp(std::span<const double> v);

}  // namespace statfuse::numerics
