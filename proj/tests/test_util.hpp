#pragma once

#include <cmath>
#include <stdexcept>

// absolute and relative closeness helpers shared by the test suites
inline bool abs_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol;
}

inline bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}
