#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>

#include "vkwave/common.hpp"
#include "vkwave/kernels.hpp"
#include "vkwave/memory.hpp"
#include "vkwave/mesh.hpp"
#include "vkwave/problem.hpp"

namespace vkwave {

// Time series of every functional the run records, aligned by output
// record. The cumulative columns are running trapezoid integrals on the
// step grid (dissipation/work) or on the record grid (kernel terms).
struct EnergyLedger {
  Vec t;
  Vec E, I, J;
  Vec g_circ;
  Vec grad_sq, grad_4;
  Vec lp;                 // ||u||_p^p
  Vec v_sq, v_bdry_sq;    // ||u_t||_2^2 and |u_t(L)|^2
  Vec M_coeff;
  Vec diss_rate;
  Vec F;                  // filled after the run completes
  Vec G, H;
  Vec u_sq, u_bdry_sq;    // ||u||_2^2 and |u(L)|^2 (ingredients of F)

  // cumulative integrals from t = 0 (step-grid trapezoid)
  Vec cum_u_sq, cum_grad_sq, cum_grad4, cum_u_bdry_sq;  // of u-quantities, for F
  Vec cum_diss_alpha, cum_diss_beta, cum_diss_gamma, cum_diss_sigma;
  Vec cum_diss_kernel;  // record-grid trapezoid of -(1/2)(g' o grad u) + (1/2) g ||grad u||^2
  Vec source_work;      // integral of the source power against u_t

  bool approximate_history_functionals = false;

  std::size_t size() const { return t.size(); }
};

// Instantaneous quantities derived from one state. The heavy part is a
// single pass over the history shared by every functional below.
struct FunctionalFrame {
  double t = 0.0;
  double grad_sq = 0.0, grad_4 = 0.0;
  double lp = 0.0;
  double u_sq = 0.0, u_bdry = 0.0;
  double v_sq = 0.0, v_bdry = 0.0;
  double v_grad_sq = 0.0;  // ||grad u_t||_2^2
  double uKv = 0.0;        // u^T K v = (1/2) d/dt ||grad u||^2
  double g_cum = 0.0;
  double g_circ = 0.0, gprime_circ = 0.0;
  Vec theta;  // memory difference integral, nodal
};

inline FunctionalFrame make_frame(const AssembledOperators& ops, const ProblemConfig& cfg,
                                  const History& hist, const Vec& u, const Vec& v,
                                  double t) {
  FunctionalFrame f;
  f.t = t;
  f.grad_sq = ops.K_stiff.quad_form(u);
  f.grad_4 = f.grad_sq * f.grad_sq;
  f.lp = lp_norm_p(ops.mesh, to_full(ops.mesh, u), cfg.p);
  f.u_sq = ops.M_mass.quad_form(u);
  f.u_bdry = boundary_trace(u);
  f.v_sq = ops.M_mass.quad_form(v);
  f.v_bdry = boundary_trace(v);
  f.v_grad_sq = ops.K_stiff.quad_form(v);
  f.uKv = ops.K_stiff.bilinear(u, v);
  f.g_cum = cumulative_g(cfg.kernel, t);
  History::Scan scan = hist.scan(ops, u, t);
  f.g_circ = scan.g_circ;
  f.gprime_circ = scan.gprime_circ;
  f.theta = std::move(scan.theta);
  return f;
}

// With the source switched off its potential term drops out of I, J and E
// as well, so E is exactly the energy of the equation being solved.
inline double functional_I(const ProblemConfig& cfg, const FunctionalFrame& f) {
  double src = cfg.source_on ? f.lp : 0.0;
  return (cfg.a - f.g_cum) * f.grad_sq + f.g_circ - src + 0.5 * cfg.b * f.grad_4;
}

inline double functional_J(const ProblemConfig& cfg, const FunctionalFrame& f) {
  double src = cfg.source_on ? f.lp : 0.0;
  return 0.5 * ((cfg.a - f.g_cum) * f.grad_sq + 0.5 * cfg.b * f.grad_4 + f.g_circ) -
         src / cfg.p;
}

inline double functional_E(const ProblemConfig& cfg, const FunctionalFrame& f) {
  return functional_J(cfg, f) + 0.5 * f.v_sq + 0.5 * f.v_bdry * f.v_bdry;
}

// Right-hand side of the energy dissipation law; nonpositive for any
// admissible kernel since every term carries its own sign.
inline double dissipation_rate(const ProblemConfig& cfg, const FunctionalFrame& f) {
  double g_t = eval_g(cfg.kernel, f.t);
  double bdry_m = std::pow(std::abs(f.v_bdry), cfg.m);
  return 0.5 * f.gprime_circ - 0.5 * g_t * f.grad_sq - cfg.sigma * f.uKv * f.uKv -
         cfg.alpha * f.v_sq - cfg.beta * f.v_grad_sq - cfg.gamma * bdry_m;
}

inline double functional_G(const AssembledOperators& ops, const ProblemConfig& cfg,
                           const Vec& u, const Vec& v, const FunctionalFrame& f) {
  double pairing = ops.M_mass.bilinear(v, u) + f.v_bdry * f.u_bdry * ops.boundary_mass;
  return pairing + 0.5 * cfg.alpha * f.u_sq + 0.5 * cfg.beta * f.grad_sq +
         0.25 * cfg.sigma * f.grad_4;
}

inline double functional_H(const AssembledOperators& ops, const Vec& v,
                           const FunctionalFrame& f) {
  double bulk = 0.0;
  {
    Vec mtheta = ops.M_mass.apply(f.theta);
    bulk = dot(v, mtheta);
  }
  double bdry = boundary_trace(v) * boundary_trace(f.theta) * ops.boundary_mass;
  return -bulk - bdry;
}

inline double lyapunov_L(double E, double G, double H, double eps1, double eps2) {
  if (eps1 < 0.0 || eps2 < 0.0)
    throw std::invalid_argument("lyapunov_L: eps1, eps2 must be >= 0");
  return E + eps1 * G + eps2 * H;
}

// min and max of E/L over records where both are positive; the fitted
// equivalence band constants.
inline std::pair<double, double> equivalence_band(const Vec& E_series, const Vec& L_series) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < E_series.size() && i < L_series.size(); ++i) {
    if (!(E_series[i] > 0.0) || !(L_series[i] > 0.0)) continue;
    double r = E_series[i] / L_series[i];
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  return {lo, hi};
}

// Concavity functional F over the recorded series. T is the reference
// horizon of the frozen bracket term and must not precede the series end;
// b_const is positive only when E(0) < 0.
inline Vec blowup_F(const EnergyLedger& led, const ProblemConfig& cfg, double T,
                    double T0, double b_const) {
  if (led.size() == 0) return {};
  if (T < led.t.back() - 1e-12)
    throw std::invalid_argument("blowup_F: horizon T precedes the series end");
  double B0 = cfg.alpha * led.u_sq[0] + cfg.beta * led.grad_sq[0] +
              cfg.gamma * led.u_bdry_sq[0] + 0.5 * cfg.sigma * led.grad_4[0];
  Vec F(led.size(), 0.0);
  for (std::size_t i = 0; i < led.size(); ++i) {
    double ti = led.t[i];
    F[i] = led.u_sq[i] + led.u_bdry_sq[i] + 0.5 * cfg.sigma * led.cum_grad4[i] +
           cfg.alpha * led.cum_u_sq[i] + cfg.beta * led.cum_grad_sq[i] +
           cfg.gamma * led.cum_u_bdry_sq[i] + (T - ti) * B0 +
           b_const * (ti + T0) * (ti + T0);
  }
  return F;
}

// F F'' - (1 + kappa) (F')^2 by centered differences on the uniform record
// grid. Endpoint records carry no value (NaN). Diagnostic only.
inline Vec concavity_margin(const Vec& F, double dt_records, double kappa) {
  Vec margin(F.size(), std::numeric_limits<double>::quiet_NaN());
  if (F.size() < 3) return margin;
  for (std::size_t i = 1; i + 1 < F.size(); ++i) {
    double d1 = (F[i + 1] - F[i - 1]) / (2.0 * dt_records);
    double d2 = (F[i + 1] - 2.0 * F[i] + F[i - 1]) / (dt_records * dt_records);
    margin[i] = F[i] * d2 - (1.0 + kappa) * d1 * d1;
  }
  return margin;
}

// Upper bound F(0) / (kappa F'(0)) on the blow-up time of the concavity
// argument.
inline double blowup_time_bound(double F0, double Fp0, double kappa) {
  if (!(F0 > 0.0)) throw std::invalid_argument("blowup_time_bound: F(0) must be > 0");
  if (!(Fp0 > 0.0))
    throw std::invalid_argument("blowup_time_bound: requires F'(0) > 0");
  if (!(kappa > 0.0)) throw std::invalid_argument("blowup_time_bound: kappa must be > 0");
  return F0 / (kappa * Fp0);
}

}  // namespace vkwave
