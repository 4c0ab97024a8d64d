#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "statfuse/numerics.hpp"
#include "statfuse/rng.hpp"
#include "test_util.hpp"

using namespace statfuse;
using namespace statfuse::numerics;

TEST_CASE("ln_gamma closed forms") {
  CHECK(abs_close(ln_gamma(1.0), 0.0, 1e-12));
  CHECK(abs_close(ln_gamma(0.5), 0.5 * std::log(std::numbers::pi), 1e-12));
  CHECK(abs_close(ln_gamma(6.0), std::log(120.0), 1e-12));
  CHECK(abs_close(ln_gamma(2.0), 0.0, 1e-12));
  CHECK_THROWS_AS(ln_gamma(0.0), std::domain_error);
  CHECK_THROWS_AS(ln_gamma(-3.0), std::domain_error);
}

TEST_CASE("ln_gamma recurrence over [0.1, 100]") {
  Rng rng(42);
  for (int i = 0; i < 2000; ++i) {
    const double x = 0.1 + rng.next_double() * 99.9;
    // Gamma(x+1) = x Gamma(x), compared in log space: the relative error of
    // exp(lhs - rhs) is bounded by |lhs - rhs| for small differences
    const double lhs = ln_gamma(x + 1.0);
    const double rhs = std::log(x) + ln_gamma(x);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("digamma closed forms") {
  const double euler = 0.57721566490153286060651209008240243;
  CHECK(abs_close(digamma(1.0), -euler, 1e-10));
  CHECK(abs_close(digamma(0.5), -euler - 2.0 * std::log(2.0), 1e-10));
  CHECK(abs_close(digamma(3.5) - digamma(2.5), 0.4, 1e-10));
  CHECK_THROWS_AS(digamma(0.0), std::domain_error);
  CHECK_THROWS_AS(digamma(-1.0), std::domain_error);
}

TEST_CASE("digamma recurrence over [0.1, 100]") {
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    const double x = 0.1 + rng.next_double() * 99.9;
    CHECK(abs_close(digamma(x + 1.0) - digamma(x), 1.0 / x, 1e-10));
  }
}

TEST_CASE("inv_digamma round trips") {
  CHECK(abs_close(inv_digamma(digamma(3.0)), 3.0, 1e-9));
  CHECK(abs_close(inv_digamma(-0.5772156649015329), 1.0, 1e-9));
  CHECK(abs_close(inv_digamma(digamma(0.01)), 0.01, 1e-8));
  CHECK_THROWS_AS(inv_digamma(std::nan("")), std::domain_error);
}

TEST_CASE("inv_digamma is the identity over [1e-3, 1e4]") {
  Rng rng(13);
  for (int i = 0; i < 500; ++i) {
    // log-uniform across seven decades
    const double x = std::pow(10.0, -3.0 + rng.next_double() * 7.0);
    const double back = inv_digamma(digamma(x));
    CHECK(std::abs(back - x) <= 1e-8 * std::max(1.0, x));
    CHECK(abs_close(digamma(back), digamma(x), 1e-10));
  }
}

TEST_CASE("log_sum_exp") {
  const std::vector<double> two_zeros{0.0, 0.0};
  CHECK(abs_close(log_sum_exp(two_zeros), std::log(2.0), 1e-12));
  const std::vector<double> large{1000.0, 1000.0};
  CHECK(abs_close(log_sum_exp(large), 1000.0 + std::log(2.0), 1e-9));
  const std::vector<double> single{-3.2};
  CHECK(abs_close(log_sum_exp(single), -3.2, 1e-12));
  CHECK_THROWS_AS(log_sum_exp({}), std::domain_error);
}

TEST_CASE("log_sum_exp shift invariance") {
  Rng rng(99);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> v(1 + (rng.next_u64() % 8));
    for (double& x : v) x = (rng.next_double() - 0.5) * 2e4;
    const double c = (rng.next_double() - 0.5) * 100.0;
    std::vector<double> shifted = v;
    for (double& x : shifted) x += c;
    const double expected = log_sum_exp(v) + c;
    CHECK(std::abs(log_sum_exp(shifted) - expected) <=
          1e-12 * std::max(1.0, std::abs(expected)));
  }
}
