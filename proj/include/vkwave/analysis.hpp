#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "vkwave/common.hpp"
#include "vkwave/integrator.hpp"
#include "vkwave/kernels.hpp"
#include "vkwave/mesh.hpp"
#include "vkwave/problem.hpp"

namespace vkwave {

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
  std::size_t n = 0;
};

inline LineFit fit_line(const Vec& x, const Vec& y) {
  LineFit f;
  f.n = std::min(x.size(), y.size());
  if (f.n < 2) throw fit_error("fit_line: need at least two points");
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < f.n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  double mx = sx / double(f.n), my = sy / double(f.n);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < f.n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw fit_error("fit_line: degenerate abscissa");
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

namespace detail {

// L_p load against the P1 basis on the free dofs; for p = 2 this is the
// consistent mass pairing.
inline Vec lp_gradient_load(const AssembledOperators& ops, const Vec& u, double p) {
  if (p == 2.0) return ops.M_mass.apply(u);
  return power_load(ops.mesh, to_full(ops.mesh, u), p);
}

inline double lp_ratio(const AssembledOperators& ops, const Vec& u, double p) {
  double den = ops.K_stiff.quad_form(u);
  if (!(den > 0.0)) return 0.0;
  double num = lp_norm_p(ops.mesh, to_full(ops.mesh, u), p);
  return std::pow(num, 1.0 / p) / std::sqrt(den);
}

// One multi-start ascent of ||u||_p / ||grad u||_2 over the FEM space.
// Each iterate replaces u by the energy-preconditioned load direction,
// projected back to the unit gradient sphere, with a damped fallback when
// the plain replacement does not ascend. Returns the refined direction.
inline Vec ascend_ratio(const AssembledOperators& ops, Vec u, double p, double tol,
                        std::size_t max_iter) {
  TriDiagLDL Kf(ops.K_stiff);
  auto normalize = [&](Vec& w) {
    double g = ops.K_stiff.quad_form(w);
    if (!(g > 0.0)) return false;
    scale(w, 1.0 / std::sqrt(g));
    return true;
  };
  if (!normalize(u)) return u;
  double ratio = lp_ratio(ops, u, p);
  for (std::size_t it = 0; it < max_iter; ++it) {
    Vec d = Kf.solve(lp_gradient_load(ops, u, p));
    if (!normalize(d)) break;
    double cand = lp_ratio(ops, d, p);
    if (cand < ratio) {
      double eta = 0.5;
      while (eta > 1e-6) {
        Vec mix(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) mix[i] = u[i] + eta * (d[i] - u[i]);
        if (normalize(mix)) {
          double r = lp_ratio(ops, mix, p);
          if (r >= ratio) {
            d = std::move(mix);
            cand = r;
            break;
          }
        }
        eta *= 0.5;
      }
      if (cand < ratio) break;  // no ascent direction left
    }
    double change = std::abs(cand - ratio);
    u = std::move(d);
    ratio = cand;
    if (change <= tol * std::max(ratio, 1e-300)) break;
  }
  return u;
}

inline std::vector<Vec> multistart_directions(const AssembledOperators& ops, double p,
                                              std::size_t n_starts, unsigned long seed,
                                              double tol = 1e-8,
                                              std::size_t max_iter = 500) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<Vec> dirs;
  dirs.reserve(n_starts);
  const std::size_t n = ops.mesh.n_free();
  for (std::size_t s = 0; s < n_starts; ++s) {
    Vec u(n);
    for (double& x : u) x = unif(rng);
    dirs.push_back(ascend_ratio(ops, std::move(u), p, tol, max_iter));
  }
  return dirs;
}

}  // namespace detail

// Best constant of ||u||_p <= C ||grad u||_2 over the FEM space, by
// seeded multi-start projected ascent on the Rayleigh-type ratio.
inline double estimate_embedding_constant(const AssembledOperators& ops, double p,
                                          std::size_t n_starts = 20,
                                          unsigned long seed = 42) {
  if (p < 2.0) throw std::invalid_argument("estimate_embedding_constant: p must be >= 2");
  double best = 0.0;
  for (const Vec& u : detail::multistart_directions(ops, p, n_starts, seed))
    best = std::max(best, detail::lp_ratio(ops, u, p));
  return best;
}

namespace detail {

// sup over lambda >= 0 of the t = 0 potential along a fixed direction:
//   phi(lambda) = a/2 lambda^2 S + b/4 lambda^4 S^2 - lambda^p / p P.
// Returns +inf when the profile is unbounded along this direction.
inline double direction_sup(double a, double b, double p, double S, double P) {
  if (!(S > 0.0) || !(P > 0.0)) return std::numeric_limits<double>::infinity();
  auto phi = [&](double lam) {
    return 0.5 * a * lam * lam * S + 0.25 * b * std::pow(lam, 4) * S * S -
           std::pow(lam, p) / p * P;
  };
  // geometric scan for a bracket around the maximizer
  const int jlo = -60, jhi = 80;
  double best_val = 0.0, best_lam = 0.0;
  int best_j = jlo - 1;
  for (int j = jlo; j <= jhi; ++j) {
    double lam = std::ldexp(1.0, j);
    double v = phi(lam);
    if (v > best_val) {
      best_val = v;
      best_lam = lam;
      best_j = j;
    }
  }
  if (best_j >= jhi) return std::numeric_limits<double>::infinity();
  if (best_j < jlo) return 0.0;  // never above zero: sup at lambda = 0
  double lo = std::ldexp(1.0, best_j - 1);
  double hi = std::ldexp(1.0, best_j + 1);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = phi(x1), f2 = phi(x2);
  for (int it = 0; it < 200 && (hi - lo) > 1e-13 * std::max(1.0, best_lam); ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = phi(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = phi(x1);
    }
  }
  return std::max(phi(0.5 * (lo + hi)), best_val);
}

}  // namespace detail

// Lower estimate of the potential well depth: minimum over refined trial
// directions of the exact 1-D maximization along each ray. Directions with
// an unbounded profile (the quartic term winning against the source) are
// skipped.
inline double estimate_depth_d1(const AssembledOperators& ops, double a, double b,
                                double p, std::size_t n_starts = 20,
                                unsigned long seed = 42) {
  if (!(p > 2.0)) throw std::invalid_argument("estimate_depth_d1: p must be > 2");
  double best = std::numeric_limits<double>::infinity();
  for (const Vec& u : detail::multistart_directions(ops, p, n_starts, seed)) {
    double S = ops.K_stiff.quad_form(u);
    double P = lp_norm_p(ops.mesh, to_full(ops.mesh, u), p);
    double sup = detail::direction_sup(a, b, p, S, P);
    if (std::isfinite(sup)) best = std::min(best, sup);
  }
  return best;
}

struct Classification {
  enum class Verdict { StableSet, UnstableNegativeEnergy, UnstableSubDepth, Indeterminate };
  Verdict verdict = Verdict::Indeterminate;
  double E0 = 0.0;
  double I0 = 0.0;
  double J0 = 0.0;
  double condition_42_lhs = 0.0;
  double d1_estimate = 0.0;
  double cstar = 0.0;
  double l = 0.0;
  double kernel_mass = 0.0;
  double kernel_mass_bound = 0.0;
  bool kernel_mass_ok = false;
  double initial_cross = 0.0;  // integral of u0 u1 plus the boundary product
  std::string note;
};

inline const char* to_string(Classification::Verdict v) {
  switch (v) {
    case Classification::Verdict::StableSet: return "StableSet";
    case Classification::Verdict::UnstableNegativeEnergy: return "UnstableNegativeEnergy";
    case Classification::Verdict::UnstableSubDepth: return "UnstableSubDepth";
    case Classification::Verdict::Indeterminate: return "Indeterminate";
  }
  return "?";
}

// Sort the initial data into the stable set, one of the two unstable
// regimes of the blow-up theory, or Indeterminate as the safe fallback.
inline Classification classify(const ProblemConfig& cfg, const AssembledOperators& ops) {
  const std::size_t n = ops.mesh.n_free();
  Vec u0 = cfg.u0_nodal.value_or(Vec(n, 0.0));
  Vec u1 = cfg.u1_nodal.value_or(Vec(n, 0.0));

  Classification c;
  double grad0 = ops.K_stiff.quad_form(u0);
  double lp0 = lp_norm_p(ops.mesh, to_full(ops.mesh, u0), cfg.p);
  double vsq0 = ops.M_mass.quad_form(u1);
  double vb0 = boundary_trace(u1);
  c.I0 = cfg.a * grad0 + 0.5 * cfg.b * grad0 * grad0 - lp0;
  c.J0 = 0.5 * (cfg.a * grad0 + 0.5 * cfg.b * grad0 * grad0) - lp0 / cfg.p;
  c.E0 = c.J0 + 0.5 * vsq0 + 0.5 * vb0 * vb0;
  c.l = residual_l(cfg.kernel, cfg.a);
  c.kernel_mass = kernel_mass(cfg.kernel);
  c.initial_cross = ops.M_mass.bilinear(u1, u0) +
                    boundary_trace(u1) * boundary_trace(u0) * ops.boundary_mass;

  c.cstar = estimate_embedding_constant(ops, cfg.p, cfg.n_starts, cfg.seed);
  c.d1_estimate = cfg.d1_override.value_or(
      estimate_depth_d1(ops, cfg.a, cfg.b, cfg.p, cfg.n_starts, cfg.seed));

  const double p = cfg.p;
  if (c.l > 0.0) {
    double base = 2.0 * p / (c.l * (p - 2.0)) * std::max(c.E0, 0.0);
    c.condition_42_lhs = std::pow(c.cstar, p) / c.l * std::pow(base, 0.5 * (p - 2.0));
  } else {
    c.condition_42_lhs = std::numeric_limits<double>::infinity();
  }

  double delta;
  if (c.E0 < 0.0) {
    delta = -1.0;
  } else if (std::isfinite(c.d1_estimate) && c.d1_estimate > 0.0) {
    delta = c.E0 / c.d1_estimate;
  } else {
    delta = 0.0;
  }
  double delta_t = std::max(0.0, delta);
  if (delta_t < 1.0) {
    double denom = (1.0 - delta_t) * (1.0 - delta_t) * p + 2.0 * delta_t * (1.0 - delta_t);
    c.kernel_mass_bound = (p - 2.0) / (cfg.a * (p - 2.0) + 1.0 / denom);
    c.kernel_mass_ok = c.kernel_mass <= c.kernel_mass_bound;
  } else {
    c.kernel_mass_bound = 0.0;
    c.kernel_mass_ok = false;
  }

  if (c.E0 < 0.0) {
    c.verdict = Classification::Verdict::UnstableNegativeEnergy;
  } else if (c.I0 > 0.0 && c.l > 0.0 && c.condition_42_lhs < 1.0) {
    c.verdict = Classification::Verdict::StableSet;
  } else if (c.E0 < c.d1_estimate && c.I0 <= 0.0 && c.kernel_mass_ok &&
             c.initial_cross > 0.0) {
    c.verdict = Classification::Verdict::UnstableSubDepth;
  } else {
    c.verdict = Classification::Verdict::Indeterminate;
    if (grad0 == 0.0 && vsq0 == 0.0 && vb0 == 0.0)
      c.note = "zero initial data: I(0) = 0 degenerately, the zero solution is global";
  }
  return c;
}

struct DecayFit {
  double K_fit = 0.0;
  double k_fit = 0.0;
  double t0 = 0.0;
  double r_squared = 0.0;
  std::size_t n_points = 0;
};

// Least squares of ln E against minus the integrated rate function from
// the transient cutoff t0. Stops at the first nonpositive energy inside
// the window; fewer than 10 usable points is a fit error.
inline DecayFit fit_decay(const Vec& t_series, const Vec& E_series, const RateFunction& xi,
                          double t0) {
  Vec x, y;
  for (std::size_t i = 0; i < t_series.size() && i < E_series.size(); ++i) {
    if (t_series[i] < t0) continue;
    if (!(E_series[i] > 0.0)) break;  // window truncation
    x.push_back(-xi_integral(xi, t0, t_series[i]));
    y.push_back(std::log(E_series[i]));
  }
  if (x.size() < 10)
    throw fit_error("fit_decay: fewer than 10 usable records past t0 = " +
                    std::to_string(t0));
  LineFit lf = fit_line(x, y);
  DecayFit d;
  d.k_fit = lf.slope;
  d.K_fit = std::exp(lf.intercept);
  d.t0 = t0;
  d.r_squared = lf.r_squared;
  d.n_points = lf.n;
  return d;
}

struct SingularityFit {
  double q = 0.0;
  double r_squared = 0.0;
  double t_singularity = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
};

// Fit the reciprocal growth of ||grad u||_2 near the end of the series:
// ||grad u||^(-q) should hit zero linearly in t at the singularity. The
// exponent comes from the best linear fit among q in {1, 2, 4}.
inline SingularityFit fit_singularity_time(const Vec& t_series, const Vec& grad_sq) {
  SingularityFit best;
  std::size_t n = std::min(t_series.size(), grad_sq.size());
  if (n < 4) return best;
  std::size_t tail = std::max<std::size_t>(10, n / 5);
  tail = std::min(tail, n);
  Vec tt, gg;
  for (std::size_t i = n - tail; i < n; ++i) {
    if (!(grad_sq[i] > 0.0) || !std::isfinite(grad_sq[i])) continue;
    tt.push_back(t_series[i]);
    gg.push_back(grad_sq[i]);
  }
  if (tt.size() < 4) return best;
  for (double q : {1.0, 2.0, 4.0}) {
    Vec y(gg.size());
    for (std::size_t i = 0; i < gg.size(); ++i) y[i] = std::pow(gg[i], -0.5 * q);
    LineFit lf;
    try {
      lf = fit_line(tt, y);
    } catch (const fit_error&) {
      continue;
    }
    if (!(lf.slope < 0.0)) continue;
    if (!best.ok || lf.r_squared > best.r_squared) {
      best.ok = true;
      best.q = q;
      best.r_squared = lf.r_squared;
      best.t_singularity = -lf.intercept / lf.slope;
    }
  }
  return best;
}

struct BlowupSummary {
  bool detected = false;
  std::string message;
  double t_cross = 0.0;
  SingularityFit singularity;
  double kappa = 0.0;
  double F0 = 0.0;
  double Fprime0 = 0.0;
  double b_const = 0.0;
  double T0_shift = 0.0;
  bool bound_available = false;
  double bound = std::numeric_limits<double>::infinity();
};

// Concavity-argument upper bound on the blow-up time, with the horizon of
// the functional chosen self-consistently (the frozen bracket term makes
// F(0) depend on the horizon when damping is present).
inline BlowupSummary bound_from_initial_data(double u_sq0, double u_bdry_sq0,
                                             double grad_sq0, double grad4_0,
                                             const ProblemConfig& cfg, double E0,
                                             double cross) {
  BlowupSummary s;
  s.kappa = (cfg.p - 2.0) / 4.0;
  BlowupFParams fp = blowup_f_params(E0, cross);
  s.b_const = fp.b_const;
  s.T0_shift = fp.T0;
  s.Fprime0 = fp.Fprime0;
  double C0 = u_sq0 + u_bdry_sq0 + fp.b_const * fp.T0 * fp.T0;
  double B0 = cfg.alpha * u_sq0 + cfg.beta * grad_sq0 + cfg.gamma * u_bdry_sq0 +
              0.5 * cfg.sigma * grad4_0;
  if (fp.Fprime0 > 0.0 && s.kappa * fp.Fprime0 > B0 && C0 > 0.0) {
    double T_hat = C0 / (s.kappa * fp.Fprime0 - B0);
    s.F0 = C0 + T_hat * B0;
    s.bound = blowup_time_bound(s.F0, s.Fprime0, s.kappa);
    s.bound_available = true;
  } else {
    s.F0 = C0;
    s.bound_available = false;
  }
  return s;
}

inline BlowupSummary detect_blowup(const RunResult& result, const ProblemConfig& cfg) {
  BlowupSummary s;
  if (result.termination == Termination::Horizon) {
    s.detected = false;
    s.message = "no blow-up detected";
    return s;
  }
  const EnergyLedger& led = result.ledger;
  s = bound_from_initial_data(led.u_sq[0], led.u_bdry_sq[0], led.grad_sq[0],
                              led.grad_4[0], cfg, result.E0, result.initial_cross);
  s.detected = true;
  s.message = result.termination == Termination::BlowupThreshold
                  ? "gradient norm crossed the blow-up threshold"
                  : "run ended in numeric failure (treated as suspected blow-up)";
  s.t_cross = result.termination_time;
  s.singularity = fit_singularity_time(result.ledger.t, result.ledger.grad_sq);
  return s;
}

}  // namespace vkwave
