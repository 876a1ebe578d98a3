#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "vkwave/common.hpp"

namespace vkwave {

// Relaxation kernel g of the viscoelastic memory term. Immutable after
// construction; safe to share across threads.
struct RelaxationKernel {
  enum class Family { Zero, Exponential, Polynomial, Tabulated };

  Family family = Family::Zero;
  double g0 = 0.0;  // amplitude, g(0)
  double mu = 0.0;  // exponential rate
  double nu = 0.0;  // polynomial exponent, > 1
  std::vector<std::pair<double, double>> table;  // (s, g(s)) samples

  static RelaxationKernel zero() { return RelaxationKernel{}; }

  static RelaxationKernel exponential(double g0, double mu) {
    if (!(g0 > 0.0)) throw std::invalid_argument("exponential kernel: g0 must be > 0");
    if (!(mu > 0.0)) throw std::invalid_argument("exponential kernel: mu must be > 0");
    RelaxationKernel k;
    k.family = Family::Exponential;
    k.g0 = g0;
    k.mu = mu;
    return k;
  }

  static RelaxationKernel polynomial(double g0, double nu) {
    if (!(g0 > 0.0)) throw std::invalid_argument("polynomial kernel: g0 must be > 0");
    if (!(nu > 1.0)) throw std::invalid_argument("polynomial kernel: nu must be > 1");
    RelaxationKernel k;
    k.family = Family::Polynomial;
    k.g0 = g0;
    k.nu = nu;
    return k;
  }

  static RelaxationKernel tabulated(std::vector<std::pair<double, double>> samples) {
    if (samples.size() < 2)
      throw std::invalid_argument("tabulated kernel: need at least two samples");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples[i].first < 0.0)
        throw std::invalid_argument("tabulated kernel: sample times must be >= 0");
      if (i > 0 && !(samples[i].first > samples[i - 1].first))
        throw std::invalid_argument("tabulated kernel: sample times must be increasing");
      if (samples[i].second < 0.0)
        throw std::invalid_argument("tabulated kernel: values must be >= 0");
    }
    RelaxationKernel k;
    k.family = Family::Tabulated;
    k.table = std::move(samples);
    k.g0 = k.table.front().second;
    return k;
  }

  bool is_zero() const { return family == Family::Zero; }

  bool has_closed_form_derivative() const { return family != Family::Tabulated; }
};

inline double eval_g(const RelaxationKernel& k, double s) {
  if (s < 0.0) throw std::domain_error("eval_g: s must be >= 0");
  switch (k.family) {
    case RelaxationKernel::Family::Zero:
      return 0.0;
    case RelaxationKernel::Family::Exponential:
      return k.g0 * std::exp(-k.mu * s);
    case RelaxationKernel::Family::Polynomial:
      return k.g0 * std::pow(1.0 + s, -k.nu);
    case RelaxationKernel::Family::Tabulated: {
      const auto& tab = k.table;
      if (s <= tab.front().first) return tab.front().second;
      if (s >= tab.back().first) return 0.0;  // extended by zero past the data
      auto it = std::upper_bound(tab.begin(), tab.end(), s,
                                 [](double v, const auto& p) { return v < p.first; });
      const auto& hi = *it;
      const auto& lo = *(it - 1);
      double w = (s - lo.first) / (hi.first - lo.first);
      return (1.0 - w) * lo.second + w * hi.second;
    }
  }
  return 0.0;
}

// d/ds g(s): closed form where available, centered differences on the
// sample spacing for tabulated data.
inline double eval_gprime(const RelaxationKernel& k, double s) {
  if (s < 0.0) throw std::domain_error("eval_gprime: s must be >= 0");
  switch (k.family) {
    case RelaxationKernel::Family::Zero:
      return 0.0;
    case RelaxationKernel::Family::Exponential:
      return -k.mu * eval_g(k, s);
    case RelaxationKernel::Family::Polynomial:
      return -k.nu / (1.0 + s) * eval_g(k, s);
    case RelaxationKernel::Family::Tabulated: {
      // stencil spacing = the sample spacing, so the differences straddle
      // whole segments and recover the sampled function at O(h^2); a
      // narrower stencil would only reproduce the interpolant's chords
      double span = k.table.back().first - k.table.front().first;
      double h = span / double(k.table.size() - 1);
      if (s >= h)
        return (eval_g(k, s + h) - eval_g(k, s - h)) / (2.0 * h);
      return (-3.0 * eval_g(k, s) + 4.0 * eval_g(k, s + h) - eval_g(k, s + 2.0 * h)) /
             (2.0 * h);
    }
  }
  return 0.0;
}

// Integral of g over [0, t].
inline double cumulative_g(const RelaxationKernel& k, double t) {
  if (t < 0.0) throw std::domain_error("cumulative_g: t must be >= 0");
  switch (k.family) {
    case RelaxationKernel::Family::Zero:
      return 0.0;
    case RelaxationKernel::Family::Exponential:
      if (std::isinf(t)) return k.g0 / k.mu;
      return k.g0 / k.mu * (1.0 - std::exp(-k.mu * t));
    case RelaxationKernel::Family::Polynomial:
      if (std::isinf(t)) return k.g0 / (k.nu - 1.0);
      return k.g0 / (k.nu - 1.0) * (1.0 - std::pow(1.0 + t, 1.0 - k.nu));
    case RelaxationKernel::Family::Tabulated: {
      // exact integral of the piecewise-linear interpolant, zero tail
      const auto& tab = k.table;
      double acc = 0.0;
      if (t > 0.0 && tab.front().first > 0.0) {
        double tcl = std::min(t, tab.front().first);
        acc += tcl * tab.front().second;  // flat extension left of the data
      }
      for (std::size_t i = 0; i + 1 < tab.size(); ++i) {
        double s0 = tab[i].first, s1 = tab[i + 1].first;
        if (t <= s0) break;
        double hi = std::min(t, s1);
        double gl = tab[i].second;
        double gr = eval_g(k, hi);
        acc += 0.5 * (gl + gr) * (hi - s0);
      }
      return acc;
    }
  }
  return 0.0;
}

// Total mass of the kernel, integral of g over [0, inf).
inline double kernel_mass(const RelaxationKernel& k) {
  switch (k.family) {
    case RelaxationKernel::Family::Zero:
      return 0.0;
    case RelaxationKernel::Family::Exponential:
      return k.g0 / k.mu;
    case RelaxationKernel::Family::Polynomial:
      return k.g0 / (k.nu - 1.0);
    case RelaxationKernel::Family::Tabulated:
      return cumulative_g(k, k.table.back().first);
  }
  return 0.0;
}

// Residual stiffness l = a - integral of g. May come out nonpositive;
// admissibility is the caller's call.
inline double residual_l(const RelaxationKernel& k, double a) {
  if (!(a > 0.0)) throw std::invalid_argument("residual_l: a must be > 0");
  return a - kernel_mass(k);
}

// Decay-rate function xi with g'(s) <= -xi(s) g(s).
struct RateFunction {
  enum class Form { Constant, Hyperbolic, Tabulated };

  Form form = Form::Constant;
  double c = 1.0;   // constant value
  double nu = 1.0;  // hyperbolic: xi(s) = nu / (1 + s)
  std::vector<std::pair<double, double>> table;

  static RateFunction constant(double c) {
    if (!(c > 0.0)) throw std::invalid_argument("rate function: c must be > 0");
    RateFunction x;
    x.form = Form::Constant;
    x.c = c;
    return x;
  }

  static RateFunction hyperbolic(double nu) {
    if (!(nu > 0.0)) throw std::invalid_argument("rate function: nu must be > 0");
    RateFunction x;
    x.form = Form::Hyperbolic;
    x.nu = nu;
    return x;
  }

  static RateFunction tabulated(std::vector<std::pair<double, double>> samples) {
    if (samples.size() < 2)
      throw std::invalid_argument("tabulated rate: need at least two samples");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples[i].first < 0.0)
        throw std::invalid_argument("tabulated rate: sample times must be >= 0");
      if (i > 0 && !(samples[i].first > samples[i - 1].first))
        throw std::invalid_argument("tabulated rate: sample times must be increasing");
      if (!(samples[i].second > 0.0))
        throw std::invalid_argument("tabulated rate: values must be > 0");
    }
    RateFunction x;
    x.form = Form::Tabulated;
    x.table = std::move(samples);
    return x;
  }
};

inline double eval_xi(const RateFunction& x, double s) {
  if (s < 0.0) throw std::domain_error("eval_xi: s must be >= 0");
  switch (x.form) {
    case RateFunction::Form::Constant:
      return x.c;
    case RateFunction::Form::Hyperbolic:
      return x.nu / (1.0 + s);
    case RateFunction::Form::Tabulated: {
      const auto& tab = x.table;
      if (s <= tab.front().first) return tab.front().second;
      if (s >= tab.back().first) return tab.back().second;  // flat tail, stays > 0
      auto it = std::upper_bound(tab.begin(), tab.end(), s,
                                 [](double v, const auto& p) { return v < p.first; });
      const auto& hi = *it;
      const auto& lo = *(it - 1);
      double w = (s - lo.first) / (hi.first - lo.first);
      return (1.0 - w) * lo.second + w * hi.second;
    }
  }
  return 0.0;
}

// Integral of xi over [t0, t], closed form for the analytic families.
inline double xi_integral(const RateFunction& x, double t0, double t) {
  if (t0 < 0.0) throw std::invalid_argument("xi_integral: t0 must be >= 0");
  if (t < t0) throw std::invalid_argument("xi_integral: t must be >= t0");
  switch (x.form) {
    case RateFunction::Form::Constant:
      return x.c * (t - t0);
    case RateFunction::Form::Hyperbolic:
      return x.nu * (std::log1p(t) - std::log1p(t0));
    case RateFunction::Form::Tabulated: {
      auto antider = [&](double s) {
        // integral of the interpolant over [0, s]
        const auto& tab = x.table;
        double acc = 0.0;
        double scl = std::min(s, tab.front().first);
        acc += scl * tab.front().second;
        for (std::size_t i = 0; i + 1 < tab.size(); ++i) {
          double s0 = tab[i].first, s1 = tab[i + 1].first;
          if (s <= s0) return acc;
          double hi = std::min(s, s1);
          acc += 0.5 * (tab[i].second + eval_xi(x, hi)) * (hi - s0);
        }
        if (s > tab.back().first) acc += (s - tab.back().first) * tab.back().second;
        return acc;
      };
      return antider(t) - antider(t0);
    }
  }
  return 0.0;
}

// Result of checking the kernel admissibility hypotheses: positive
// residual stiffness and the differential decay bound g' + xi g <= 0.
struct KernelReport {
  double l = 0.0;              // a - mass
  double mass = 0.0;           // integral of g over [0, inf)
  bool g1_ok = false;
  bool g2_ok = false;
  double max_violation = 0.0;  // largest g'(s) + xi(s) g(s) over the grid
  double tolerance = 0.0;
  std::string note;
};

inline KernelReport check_hypotheses(const RelaxationKernel& k, const RateFunction& xi,
                                     double a, const Vec& grid) {
  if (grid.empty()) throw std::invalid_argument("check_hypotheses: grid must be nonempty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 0.0)
      throw std::invalid_argument("check_hypotheses: grid points must be >= 0");
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw std::invalid_argument("check_hypotheses: grid must be increasing");
  }
  KernelReport rep;
  rep.mass = kernel_mass(k);
  rep.l = residual_l(k, a);
  rep.tolerance = k.has_closed_form_derivative() ? 1e-10 : 1e-6;

  if (k.is_zero()) {
    // Degenerate case used to switch the memory term off: g(0) > 0 fails
    // formally, but the residual stiffness is just a.
    rep.g1_ok = true;
    rep.g2_ok = true;
    rep.max_violation = 0.0;
    rep.note = "zero kernel admitted by convention: g(0) > 0 does not hold, l = a";
    return rep;
  }

  bool nonincreasing = true;
  double prev = eval_g(k, grid.front());
  for (std::size_t i = 1; i < grid.size(); ++i) {
    double cur = eval_g(k, grid[i]);
    if (cur > prev + rep.tolerance) nonincreasing = false;
    prev = cur;
  }
  rep.g1_ok = (eval_g(k, 0.0) > 0.0) && (rep.l > 0.0) && nonincreasing;

  double worst = -std::numeric_limits<double>::infinity();
  for (double s : grid) {
    double viol = eval_gprime(k, s) + eval_xi(xi, s) * eval_g(k, s);
    worst = std::max(worst, viol);
  }
  rep.max_violation = worst;
  rep.g2_ok = worst <= rep.tolerance;
  return rep;
}

}  // namespace vkwave
