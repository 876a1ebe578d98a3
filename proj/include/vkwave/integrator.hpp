#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>

#include "vkwave/common.hpp"
#include "vkwave/functionals.hpp"
#include "vkwave/memory.hpp"
#include "vkwave/mesh.hpp"
#include "vkwave/problem.hpp"

namespace vkwave {

enum class Termination { Horizon, BlowupThreshold, NumericFailure };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::Horizon: return "Horizon";
    case Termination::BlowupThreshold: return "BlowupThreshold";
    case Termination::NumericFailure: return "NumericFailure";
  }
  return "?";
}

// Kirchhoff coefficient M = a + b ||grad u||^2 + sigma * integral of
// grad u . grad u_t.
inline double kirchhoff_coeff(const AssembledOperators& ops, const Vec& u, const Vec& v,
                              const ProblemConfig& cfg) {
  return cfg.a + cfg.b * ops.K_stiff.quad_form(u) + cfg.sigma * ops.K_stiff.bilinear(u, v);
}

struct SimState {
  double t = 0.0;
  std::size_t step_index = 0;
  Vec u, v;
  History hist;
  Vec accel;  // latest velocity increment / dt, midpoint predictor input

  SimState(const ProblemConfig& cfg, const AssembledOperators& ops)
      : hist(cfg.memory_mode, cfg.kernel, cfg.dt, ops.mesh.n_free(),
             cfg.snapshot_budget, cfg.thin_max) {
    const std::size_t n = ops.mesh.n_free();
    u = cfg.u0_nodal.value_or(Vec(n, 0.0));
    v = cfg.u1_nodal.value_or(Vec(n, 0.0));
    if (u.size() != n || v.size() != n)
      throw std::invalid_argument("SimState: initial data sized to free dofs expected");
    accel.assign(n, 0.0);
    hist.push(0.0, u);
  }
};

// Matrices and factorizations reused across all steps of a run. The
// system matrix is constant: the Kirchhoff coefficient, the memory load
// and the source are evaluated explicitly at midpoint predictors.
struct StepWorkspace {
  TriDiag A;          // M + boundary point mass
  TriDiag halfdamp;   // dt/2 (alpha M + beta K)
  TriDiagLDL S_fact;  // A + halfdamp
  TriDiagLDL S_bdry_fact;  // same with the folded m = 2 boundary damping
  Vec w;              // S^{-1} e_L for the scalar boundary reduction
  double w_L = 0.0;
  bool fold_boundary = false;  // gamma > 0, m == 2
  bool newton_boundary = false;  // gamma > 0, m > 2
};

inline StepWorkspace prepare_step(const ProblemConfig& cfg, const AssembledOperators& ops) {
  StepWorkspace ws;
  const std::size_t n = ops.mesh.n_free();
  ws.A = ops.M_mass;
  ws.A.diag[n - 1] += ops.boundary_mass;
  ws.halfdamp = TriDiag::zeros(n);
  ws.halfdamp.add_scaled(0.5 * cfg.dt * cfg.alpha, ops.M_mass);
  ws.halfdamp.add_scaled(0.5 * cfg.dt * cfg.beta, ops.K_stiff);
  TriDiag S = ws.A;
  S.add_scaled(1.0, ws.halfdamp);
  ws.S_fact.factor(S);
  if (cfg.gamma > 0.0 && cfg.m == 2.0) {
    ws.fold_boundary = true;
    TriDiag S2 = S;
    S2.diag[n - 1] += cfg.dt * cfg.gamma;
    ws.S_bdry_fact.factor(S2);
  } else if (cfg.gamma > 0.0) {
    ws.newton_boundary = true;
    Vec e(n, 0.0);
    e[n - 1] = 1.0;
    ws.w = ws.S_fact.solve(e);
    ws.w_L = ws.w[n - 1];
  }
  return ws;
}

struct StepStats {
  int newton_iters = 0;
};

namespace detail {

// |z|^(m-2) z
inline double boundary_nl(double z, double m) {
  if (z == 0.0) return 0.0;
  return std::pow(std::abs(z), m - 2.0) * z;
}

// Root of z + c |z|^(m-2) z = target. The map is strictly increasing, so
// damped Newton from the unconstrained solution is safe.
inline double solve_boundary_scalar(double c, double m, double target, int& iters) {
  double z = target;
  const double tol = 1e-12;
  for (iters = 1; iters <= 50; ++iters) {
    double res = z + c * boundary_nl(z, m) - target;
    if (std::abs(res) <= tol) return z;
    double slope = 1.0 + c * (m - 1.0) * std::pow(std::abs(z), m - 2.0);
    double dz = -res / slope;
    double lambda = 1.0;
    double best = z + dz;
    while (lambda > 1e-8) {
      double cand = z + lambda * dz;
      double cres = cand + c * boundary_nl(cand, m) - target;
      if (std::abs(cres) < std::abs(res)) {
        best = cand;
        break;
      }
      lambda *= 0.5;
    }
    z = best;
  }
  double res = z + c * boundary_nl(z, m) - target;
  if (std::abs(res) > tol)
    throw numeric_error("boundary damping Newton iteration did not converge");
  return z;
}

}  // namespace detail

// One step of the semi-implicit midpoint scheme. Linear damping is
// trapezoidal in the velocity; the Kirchhoff stiffness, memory load and
// source act explicitly at midpoint predictors so each step costs one
// constant SPD tridiagonal solve. Throws numeric_error without touching
// the state when the step cannot be completed.
inline StepStats step(SimState& state, const ProblemConfig& cfg,
                      const AssembledOperators& ops, const StepWorkspace& ws) {
  const std::size_t n = ops.mesh.n_free();
  const double dt = cfg.dt;
  const double t_n = double(state.step_index) * dt;

  Vec u_pred(n), v_mid(n), u_end(n);
  for (std::size_t i = 0; i < n; ++i) {
    u_pred[i] = state.u[i] + 0.5 * dt * state.v[i];
    v_mid[i] = state.v[i] + 0.5 * dt * state.accel[i];
    u_end[i] = state.u[i] + dt * state.v[i];
  }

  double mstar = cfg.a + cfg.b * ops.K_stiff.quad_form(u_pred) +
                 cfg.sigma * ops.K_stiff.bilinear(u_pred, v_mid);
  if (!(mstar > 0.01 * cfg.a))
    throw numeric_error("Kirchhoff coefficient dropped below 0.01 a (M = " +
                        std::to_string(mstar) + ")");

  Vec q = state.hist.convolved_q_midpoint(t_n, u_end);
  Vec force = ops.K_stiff.apply(q);  // memory load
  {
    Vec ku = ops.K_stiff.apply(u_pred);
    axpy(-mstar, ku, force);
  }
  if (cfg.source_on) {
    Vec src = power_load(ops.mesh, to_full(ops.mesh, u_pred), cfg.p);
    axpy(1.0, src, force);
  }

  Vec rhs = ws.A.apply(state.v);
  {
    Vec damp = ws.halfdamp.apply(state.v);
    axpy(-1.0, damp, rhs);
  }
  axpy(dt, force, rhs);

  StepStats stats;
  Vec v_new;
  if (ws.fold_boundary) {
    v_new = ws.S_bdry_fact.solve(rhs);
    stats.newton_iters = 1;
  } else if (ws.newton_boundary) {
    Vec v0 = ws.S_fact.solve(rhs);
    double c = dt * cfg.gamma * ws.w_L;
    double z = detail::solve_boundary_scalar(c, cfg.m, v0[n - 1], stats.newton_iters);
    double load = dt * cfg.gamma * detail::boundary_nl(z, cfg.m);
    v_new = v0;
    axpy(-load, ws.w, v_new);
  } else {
    v_new = ws.S_fact.solve(rhs);
  }

  Vec u_new(n);
  for (std::size_t i = 0; i < n; ++i)
    u_new[i] = state.u[i] + 0.5 * dt * (state.v[i] + v_new[i]);

  if (!all_finite(u_new) || !all_finite(v_new))
    throw numeric_error("state became non-finite during the step");

  for (std::size_t i = 0; i < n; ++i) state.accel[i] = (v_new[i] - state.v[i]) / dt;
  state.u = std::move(u_new);
  state.v = std::move(v_new);
  state.step_index += 1;
  state.t = double(state.step_index) * dt;
  state.hist.push(state.t, state.u);
  return stats;
}

struct RunResult {
  Termination termination = Termination::Horizon;
  EnergyLedger ledger;
  std::size_t step_count = 0;
  double termination_time = 0.0;
  double wall_time_s = 0.0;
  double E0 = 0.0;
  double initial_cross = 0.0;  // integral of u0 u1 plus the boundary product
  double blowup_b_const = 0.0;
  double blowup_T0 = 0.0;
};

// Parameters of the concavity functional chosen the way the blow-up
// theory prescribes: b > 0 only for negative initial energy, and the time
// shift just large enough to make F'(0) positive.
struct BlowupFParams {
  double b_const = 0.0;
  double T0 = 0.0;
  double Fprime0 = 0.0;
};

inline BlowupFParams blowup_f_params(double E0, double cross) {
  BlowupFParams p;
  if (E0 < 0.0) {
    p.b_const = -2.0 * E0;
    p.T0 = std::max(0.0, -cross / p.b_const) + 1.0;
  }
  p.Fprime0 = 2.0 * (cross + p.b_const * p.T0);
  return p;
}

namespace detail {

struct StepRates {
  double diss_alpha = 0.0, diss_beta = 0.0, diss_gamma = 0.0, diss_sigma = 0.0;
  double u_sq = 0.0, grad_sq = 0.0, grad4 = 0.0, u_bdry_sq = 0.0;
  double src_power = 0.0;
};

inline StepRates step_rates(const AssembledOperators& ops, const ProblemConfig& cfg,
                            const Vec& u, const Vec& v) {
  StepRates r;
  double v_sq = ops.M_mass.quad_form(v);
  double v_grad = ops.K_stiff.quad_form(v);
  double v_bdry = boundary_trace(v);
  double uKv = ops.K_stiff.bilinear(u, v);
  r.diss_alpha = cfg.alpha * v_sq;
  r.diss_beta = cfg.beta * v_grad;
  r.diss_gamma = cfg.gamma * std::pow(std::abs(v_bdry), cfg.m);
  r.diss_sigma = cfg.sigma * uKv * uKv;
  r.u_sq = ops.M_mass.quad_form(u);
  r.grad_sq = ops.K_stiff.quad_form(u);
  r.grad4 = r.grad_sq * r.grad_sq;
  double ub = boundary_trace(u);
  r.u_bdry_sq = ub * ub;
  if (cfg.source_on) {
    Vec src = power_load(ops.mesh, to_full(ops.mesh, u), cfg.p);
    r.src_power = dot(src, v);
  }
  return r;
}

struct Accumulators {
  double cum_u_sq = 0.0, cum_grad_sq = 0.0, cum_grad4 = 0.0, cum_u_bdry_sq = 0.0;
  double diss_alpha = 0.0, diss_beta = 0.0, diss_gamma = 0.0, diss_sigma = 0.0;
  double src_work = 0.0;
  double cum_diss_kernel = 0.0;
  StepRates prev;
  double prev_kernel_rate = 0.0;
  double prev_record_t = 0.0;

  void advance(const StepRates& now, double dt) {
    cum_u_sq += 0.5 * dt * (prev.u_sq + now.u_sq);
    cum_grad_sq += 0.5 * dt * (prev.grad_sq + now.grad_sq);
    cum_grad4 += 0.5 * dt * (prev.grad4 + now.grad4);
    cum_u_bdry_sq += 0.5 * dt * (prev.u_bdry_sq + now.u_bdry_sq);
    diss_alpha += 0.5 * dt * (prev.diss_alpha + now.diss_alpha);
    diss_beta += 0.5 * dt * (prev.diss_beta + now.diss_beta);
    diss_gamma += 0.5 * dt * (prev.diss_gamma + now.diss_gamma);
    diss_sigma += 0.5 * dt * (prev.diss_sigma + now.diss_sigma);
    src_work += 0.5 * dt * (prev.src_power + now.src_power);
    prev = now;
  }
};

inline void record(EnergyLedger& led, const SimState& state, const ProblemConfig& cfg,
                   const AssembledOperators& ops, Accumulators& acc) {
  FunctionalFrame f = make_frame(ops, cfg, state.hist, state.u, state.v, state.t);
  double kernel_rate = -0.5 * f.gprime_circ + 0.5 * eval_g(cfg.kernel, f.t) * f.grad_sq;
  if (!led.t.empty()) {
    double span = state.t - acc.prev_record_t;
    acc.cum_diss_kernel += 0.5 * span * (acc.prev_kernel_rate + kernel_rate);
  }
  acc.prev_kernel_rate = kernel_rate;
  acc.prev_record_t = state.t;

  led.t.push_back(state.t);
  led.E.push_back(functional_E(cfg, f));
  led.I.push_back(functional_I(cfg, f));
  led.J.push_back(functional_J(cfg, f));
  led.g_circ.push_back(f.g_circ);
  led.grad_sq.push_back(f.grad_sq);
  led.grad_4.push_back(f.grad_4);
  led.lp.push_back(f.lp);
  led.v_sq.push_back(f.v_sq);
  led.v_bdry_sq.push_back(f.v_bdry * f.v_bdry);
  led.M_coeff.push_back(kirchhoff_coeff(ops, state.u, state.v, cfg));
  led.diss_rate.push_back(dissipation_rate(cfg, f));
  led.G.push_back(functional_G(ops, cfg, state.u, state.v, f));
  led.H.push_back(functional_H(ops, state.v, f));
  led.u_sq.push_back(f.u_sq);
  led.u_bdry_sq.push_back(f.u_bdry * f.u_bdry);
  led.cum_u_sq.push_back(acc.cum_u_sq);
  led.cum_grad_sq.push_back(acc.cum_grad_sq);
  led.cum_grad4.push_back(acc.cum_grad4);
  led.cum_u_bdry_sq.push_back(acc.cum_u_bdry_sq);
  led.cum_diss_alpha.push_back(acc.diss_alpha);
  led.cum_diss_beta.push_back(acc.diss_beta);
  led.cum_diss_gamma.push_back(acc.diss_gamma);
  led.cum_diss_sigma.push_back(acc.diss_sigma);
  led.cum_diss_kernel.push_back(acc.cum_diss_kernel);
  led.source_work.push_back(acc.src_work);
}

}  // namespace detail

// Drive the configured problem to its horizon, the blow-up threshold, or
// numeric failure, recording the ledger every output_stride steps.
inline RunResult run(const ProblemConfig& cfg) {
  validate(cfg);
  auto t_start = std::chrono::steady_clock::now();

  SpatialMesh mesh = build_mesh(cfg.L, cfg.n_elems);
  AssembledOperators ops = assemble(mesh);
  SimState state(cfg, ops);
  StepWorkspace ws = prepare_step(cfg, ops);

  RunResult out;
  out.initial_cross = ops.M_mass.bilinear(state.v, state.u) +
                      boundary_trace(state.v) * boundary_trace(state.u) * ops.boundary_mass;

  detail::Accumulators acc;
  acc.prev = detail::step_rates(ops, cfg, state.u, state.v);

  const std::size_t n_steps = std::size_t(std::llround(cfg.T_final / cfg.dt));
  out.termination = Termination::Horizon;

  for (std::size_t n = 0;; ++n) {
    if (n % cfg.output_stride == 0)
      detail::record(out.ledger, state, cfg, ops, acc);
    if (n == n_steps) {
      out.step_count = n_steps;
      break;
    }
    try {
      step(state, cfg, ops, ws);
    } catch (const numeric_error&) {
      out.termination = Termination::NumericFailure;
      out.step_count = n;
      break;
    }
    acc.advance(detail::step_rates(ops, cfg, state.u, state.v), cfg.dt);
    if (ops.K_stiff.quad_form(state.u) > cfg.blowup_threshold) {
      out.termination = Termination::BlowupThreshold;
      out.step_count = n + 1;
      if ((n + 1) % cfg.output_stride == 0)
        detail::record(out.ledger, state, cfg, ops, acc);
      break;
    }
  }

  out.termination_time = double(out.step_count) * cfg.dt;
  out.E0 = out.ledger.E.empty() ? 0.0 : out.ledger.E.front();
  BlowupFParams fp = blowup_f_params(out.E0, out.initial_cross);
  out.blowup_b_const = fp.b_const;
  out.blowup_T0 = fp.T0;
  out.ledger.F = blowup_F(out.ledger, cfg, cfg.T_final, fp.T0, fp.b_const);
  out.ledger.approximate_history_functionals = state.hist.approximate_functionals();

  out.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

}  // namespace vkwave
