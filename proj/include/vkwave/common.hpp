#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace vkwave {

using Vec = std::vector<double>;

// Thrown when an operation is asked for data the simulation state cannot
// provide (out-of-order history pushes, missing snapshots, budget overrun).
class state_error : public std::runtime_error {
 public:
  explicit state_error(const std::string& what) : std::runtime_error(what) {}
};

// Thrown on solver breakdown: singular tridiagonal factorization, boundary
// Newton stagnation, or a Kirchhoff coefficient that lost positivity.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a least-squares fit does not have enough usable data.
class fit_error : public std::runtime_error {
 public:
  explicit fit_error(const std::string& what) : std::runtime_error(what) {}
};

inline bool all_finite(const Vec& x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

inline double dot(const Vec& x, const Vec& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline void axpy(double a, const Vec& x, Vec& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline void scale(Vec& x, double a) {
  for (double& v : x) v *= a;
}

}  // namespace vkwave
