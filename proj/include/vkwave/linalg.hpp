#pragma once

#include <cstddef>
#include <string>

#include "vkwave/common.hpp"

namespace vkwave {

// Symmetric tridiagonal matrix. Everything the 1-D P1 discretization
// produces (mass, stiffness, and their step combinations) has this shape,
// so a dedicated type with an LDL^T solve covers all linear algebra here.
struct TriDiag {
  Vec diag;  // n entries
  Vec off;   // n-1 entries, off[i] couples rows i and i+1

  std::size_t size() const { return diag.size(); }

  static TriDiag zeros(std::size_t n) {
    TriDiag t;
    t.diag.assign(n, 0.0);
    t.off.assign(n > 0 ? n - 1 : 0, 0.0);
    return t;
  }

  // y = T x
  void apply(const Vec& x, Vec& y) const {
    const std::size_t n = size();
    if (x.size() != n) throw std::invalid_argument("TriDiag::apply: size mismatch");
    y.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) y[i] = diag[i] * x[i];
    for (std::size_t i = 0; i + 1 < n; ++i) {
      y[i] += off[i] * x[i + 1];
      y[i + 1] += off[i] * x[i];
    }
  }

  Vec apply(const Vec& x) const {
    Vec y;
    apply(x, y);
    return y;
  }

  // x^T T x without forming T x.
  double quad_form(const Vec& x) const {
    const std::size_t n = size();
    if (x.size() != n) throw std::invalid_argument("TriDiag::quad_form: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += diag[i] * x[i] * x[i];
    for (std::size_t i = 0; i + 1 < n; ++i) s += 2.0 * off[i] * x[i] * x[i + 1];
    return s;
  }

  // x^T T y
  double bilinear(const Vec& x, const Vec& y) const {
    const std::size_t n = size();
    if (x.size() != n || y.size() != n)
      throw std::invalid_argument("TriDiag::bilinear: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += diag[i] * x[i] * y[i];
    for (std::size_t i = 0; i + 1 < n; ++i)
      s += off[i] * (x[i] * y[i + 1] + x[i + 1] * y[i]);
    return s;
  }

  TriDiag& add_scaled(double c, const TriDiag& other) {
    for (std::size_t i = 0; i < size(); ++i) diag[i] += c * other.diag[i];
    for (std::size_t i = 0; i + 1 < size(); ++i) off[i] += c * other.off[i];
    return *this;
  }
};

// LDL^T factorization of a symmetric tridiagonal SPD matrix (Thomas
// algorithm without pivoting; safe for the SPD systems assembled here).
class TriDiagLDL {
 public:
  TriDiagLDL() = default;

  explicit TriDiagLDL(const TriDiag& t) { factor(t); }

  void factor(const TriDiag& t) {
    const std::size_t n = t.size();
    d_.assign(n, 0.0);
    l_.assign(n > 0 ? n - 1 : 0, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double di = t.diag[i];
      if (i > 0) di -= l_[i - 1] * l_[i - 1] * d_[i - 1];
      if (!(di > 0.0) || !std::isfinite(di))
        throw numeric_error("tridiagonal factorization broke down at row " +
                            std::to_string(i));
      d_[i] = di;
      if (i + 1 < n) l_[i] = t.off[i] / di;
    }
  }

  Vec solve(const Vec& b) const {
    const std::size_t n = d_.size();
    if (b.size() != n) throw std::invalid_argument("TriDiagLDL::solve: size mismatch");
    Vec x = b;
    for (std::size_t i = 1; i < n; ++i) x[i] -= l_[i - 1] * x[i - 1];
    for (std::size_t i = 0; i < n; ++i) x[i] /= d_[i];
    for (std::size_t i = n - 1; i-- > 0;) x[i] -= l_[i] * x[i + 1];
    return x;
  }

  bool empty() const { return d_.empty(); }

 private:
  Vec d_;
  Vec l_;
};

}  // namespace vkwave
