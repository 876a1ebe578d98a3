#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "vkwave/common.hpp"
#include "vkwave/kernels.hpp"
#include "vkwave/mesh.hpp"

namespace vkwave {

enum class MemoryMode { Direct, FastExponential };

// Solution history backing the Volterra memory term. Direct mode stores
// every snapshot on the fixed step grid (cost per convolution grows with
// the step count, total O(N_t^2 * n_dofs) per run). FastExponential
// maintains the trapezoid convolution of an exponential kernel through a
// one-step recurrence, O(n_dofs) per step; it keeps a thinned snapshot
// trail only so the history functionals stay available (approximately).
//
// A history belongs to a single simulation; there is no concurrent
// mutation to guard against.
class History {
 public:
  History(MemoryMode mode, const RelaxationKernel& kernel, double dt,
          std::size_t n_dofs, std::size_t budget_entries = 2'000'000,
          std::size_t thin_max = 4096)
      : mode_(mode),
        kernel_(kernel),
        dt_(dt),
        n_dofs_(n_dofs),
        budget_entries_(budget_entries),
        thin_max_(thin_max) {
    if (!(dt > 0.0)) throw std::invalid_argument("History: dt must be > 0");
    if (n_dofs == 0) throw std::invalid_argument("History: n_dofs must be > 0");
    if (mode == MemoryMode::FastExponential &&
        kernel.family != RelaxationKernel::Family::Exponential)
      throw std::invalid_argument(
          "History: FastExponential mode requires an exponential kernel");
    if (mode == MemoryMode::FastExponential) {
      decay_ = std::exp(-kernel.mu * dt);
      w_aux_.assign(n_dofs, 0.0);
      last_u_.assign(n_dofs, 0.0);
    }
  }

  MemoryMode mode() const { return mode_; }
  const RelaxationKernel& kernel() const { return kernel_; }
  double dt() const { return dt_; }
  std::size_t n_dofs() const { return n_dofs_; }
  std::size_t count() const { return count_; }
  double latest_time() const { return count_ == 0 ? -1.0 : double(count_ - 1) * dt_; }

  // History functionals evaluated off the thinned trail are approximate.
  bool approximate_functionals() const { return mode_ == MemoryMode::FastExponential; }

  // Raw snapshot access (Direct mode).
  const double* snapshot(std::size_t k) const { return data_.data() + k * n_dofs_; }

  void push(double t, const Vec& u) {
    if (u.size() != n_dofs_) throw std::invalid_argument("History::push: size mismatch");
    double expected = double(count_) * dt_;
    if (std::abs(t - expected) > 1e-9 * std::max(1.0, expected))
      throw state_error("History::push: expected t = " + std::to_string(expected) +
                        ", got " + std::to_string(t));
    if (mode_ == MemoryMode::Direct) {
      if (!kernel_.is_zero()) {  // a zero kernel never reads the history back
        if ((count_ + 1) * n_dofs_ > budget_entries_)
          throw state_error(
              "History::push: snapshot budget exceeded (" +
              std::to_string(budget_entries_) +
              " entries); raise numerics.snapshot_budget or use the fast "
              "exponential memory mode");
        data_.insert(data_.end(), u.begin(), u.end());
      }
    } else {
      if (count_ > 0) {
        // trapezoid convolution reassociated: q_{n+1} = r q_n + g0 dt/2 (r u_n + u_{n+1})
        double c = kernel_.g0 * dt_ * 0.5;
        for (std::size_t i = 0; i < n_dofs_; ++i)
          w_aux_[i] = decay_ * w_aux_[i] + c * (decay_ * last_u_[i] + u[i]);
      }
      last_u_ = u;
      if (count_ % thin_stride_ == 0) {
        thin_data_.insert(thin_data_.end(), u.begin(), u.end());
        thin_steps_.push_back(count_);
        if (thin_steps_.size() > thin_max_) rethin();
      }
    }
    ++count_;
  }

  // q(t) = integral over [0, t] of g(t - s) u(s) ds by the composite
  // trapezoid rule on the step grid. t must be the latest pushed time.
  Vec convolved_q(double t) const {
    require_time(t, "convolved_q");
    Vec q(n_dofs_, 0.0);
    const std::size_t n = count_ - 1;  // index of the latest snapshot
    if (n == 0 || kernel_.is_zero()) return q;
    if (mode_ == MemoryMode::FastExponential) return w_aux_;
    ensure_lag_cache(n);
    for (std::size_t k = 0; k <= n; ++k) {
      double w = (k == 0 || k == n) ? 0.5 : 1.0;
      double c = dt_ * w * g_lag_[n - k];
      const double* uk = snapshot(k);
      for (std::size_t i = 0; i < n_dofs_; ++i) q[i] += c * uk[i];
    }
    return q;
  }

  // Midpoint memory value for the time stepper: the average of q at the
  // latest time t_n and of the trapezoid extension to t_{n+1} with the
  // given end-of-step displacement estimate.
  Vec convolved_q_midpoint(double t, const Vec& u_end) const {
    require_time(t, "convolved_q_midpoint");
    if (u_end.size() != n_dofs_)
      throw std::invalid_argument("convolved_q_midpoint: size mismatch");
    Vec q(n_dofs_, 0.0);
    if (kernel_.is_zero()) return q;
    const std::size_t n = count_ - 1;
    if (mode_ == MemoryMode::FastExponential) {
      double c = kernel_.g0 * dt_ * 0.5;
      for (std::size_t i = 0; i < n_dofs_; ++i) {
        double q_next = decay_ * w_aux_[i] + c * (decay_ * last_u_[i] + u_end[i]);
        q[i] = 0.5 * (w_aux_[i] + q_next);
      }
      return q;
    }
    ensure_lag_cache(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
      double wa = (n >= 1) ? ((k == 0 || k == n) ? 0.5 : 1.0) * g_lag_[n - k] : 0.0;
      double wb = (k == 0 ? 0.5 : 1.0) * g_lag_[n + 1 - k];
      double c = 0.5 * dt_ * (wa + wb);
      const double* uk = snapshot(k);
      for (std::size_t i = 0; i < n_dofs_; ++i) q[i] += c * uk[i];
    }
    double ce = 0.25 * dt_ * g_lag_[0];
    for (std::size_t i = 0; i < n_dofs_; ++i) q[i] += ce * u_end[i];
    return q;
  }

  struct Scan {
    double g_circ = 0.0;        // integral of g(t-s) ||grad(u(t) - u(s))||^2
    double gprime_circ = 0.0;   // same with g' in place of g
    Vec theta;                  // integral of g(t-s) (u(t) - u(s)) ds, nodal
  };

  // One pass over the stored history evaluating every history functional
  // at once. u_now is the current displacement, t the latest pushed time.
  Scan scan(const AssembledOperators& ops, const Vec& u_now, double t) const {
    require_time(t, "scan");
    if (u_now.size() != n_dofs_) throw std::invalid_argument("History::scan: size mismatch");
    Scan out;
    out.theta.assign(n_dofs_, 0.0);
    if (kernel_.is_zero() || count_ <= 1) return out;
    Vec delta(n_dofs_);
    if (mode_ == MemoryMode::Direct) {
      const std::size_t n = count_ - 1;
      ensure_lag_cache(n);
      for (std::size_t k = 0; k <= n; ++k) {
        double w = ((k == 0 || k == n) ? 0.5 : 1.0) * dt_;
        const double* uk = snapshot(k);
        for (std::size_t i = 0; i < n_dofs_; ++i) delta[i] = u_now[i] - uk[i];
        double gq = ops.K_stiff.quad_form(delta);
        out.g_circ += w * g_lag_[n - k] * gq;
        out.gprime_circ += w * gp_lag_[n - k] * gq;
        double cg = w * g_lag_[n - k];
        for (std::size_t i = 0; i < n_dofs_; ++i) out.theta[i] += cg * delta[i];
      }
      return out;
    }
    // thinned trail: nonuniform trapezoid over the retained snapshots plus
    // the zero-contribution endpoint at s = t
    const std::size_t m = thin_steps_.size();
    Vec fg(m + 1, 0.0), fgp(m + 1, 0.0), tau(m + 1, 0.0);
    std::vector<Vec> fth;  // g(t-s) * delta per retained snapshot
    fth.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
      tau[j] = double(thin_steps_[j]) * dt_;
      const double* uk = thin_data_.data() + j * n_dofs_;
      for (std::size_t i = 0; i < n_dofs_; ++i) delta[i] = u_now[i] - uk[i];
      double gq = ops.K_stiff.quad_form(delta);
      double lag = t - tau[j];
      double g = eval_g(kernel_, lag);
      fg[j] = g * gq;
      fgp[j] = eval_gprime(kernel_, lag) * gq;
      Vec th(delta);
      scale(th, g);
      fth.push_back(std::move(th));
    }
    tau[m] = t;  // endpoint s = t uses the latest snapshot
    for (std::size_t i = 0; i < n_dofs_; ++i) delta[i] = u_now[i] - last_u_[i];
    {
      double gq = ops.K_stiff.quad_form(delta);
      fg[m] = eval_g(kernel_, 0.0) * gq;
      fgp[m] = eval_gprime(kernel_, 0.0) * gq;
      Vec th(delta);
      scale(th, eval_g(kernel_, 0.0));
      fth.push_back(std::move(th));
    }
    for (std::size_t j = 0; j + 1 <= m; ++j) {
      double w = 0.5 * (tau[j + 1] - tau[j]);
      out.g_circ += w * (fg[j] + fg[j + 1]);
      out.gprime_circ += w * (fgp[j] + fgp[j + 1]);
      axpy(w, fth[j], out.theta);
      axpy(w, fth[j + 1], out.theta);
    }
    return out;
  }

 private:
  void require_time(double t, const char* who) const {
    if (count_ == 0) throw state_error(std::string(who) + ": empty history");
    double latest = double(count_ - 1) * dt_;
    if (std::abs(t - latest) > 1e-9 * std::max(1.0, latest))
      throw state_error(std::string(who) + ": history covers [0, " +
                        std::to_string(latest) + "], requested t = " + std::to_string(t));
  }

  void ensure_lag_cache(std::size_t up_to) const {
    while (g_lag_.size() <= up_to) {
      double s = double(g_lag_.size()) * dt_;
      g_lag_.push_back(eval_g(kernel_, s));
      gp_lag_.push_back(eval_gprime(kernel_, s));
    }
  }

  void rethin() {
    thin_stride_ *= 2;
    std::size_t kept = 0;
    for (std::size_t j = 0; j < thin_steps_.size(); ++j) {
      if (thin_steps_[j] % thin_stride_ != 0) continue;
      if (kept != j) {
        thin_steps_[kept] = thin_steps_[j];
        for (std::size_t i = 0; i < n_dofs_; ++i)
          thin_data_[kept * n_dofs_ + i] = thin_data_[j * n_dofs_ + i];
      }
      ++kept;
    }
    thin_steps_.resize(kept);
    thin_data_.resize(kept * n_dofs_);
  }

  MemoryMode mode_;
  RelaxationKernel kernel_;
  double dt_;
  std::size_t n_dofs_;
  std::size_t budget_entries_;
  std::size_t thin_max_;

  Vec data_;  // Direct snapshots, row-major
  std::size_t count_ = 0;

  mutable Vec g_lag_, gp_lag_;  // g, g' sampled at integer multiples of dt

  double decay_ = 1.0;  // exp(-mu dt)
  Vec w_aux_;           // running trapezoid convolution
  Vec last_u_;
  std::size_t thin_stride_ = 1;
  Vec thin_data_;
  std::vector<std::size_t> thin_steps_;
};

inline void push_state(History& hist, double t, const Vec& u) { hist.push(t, u); }

// K times the memory integral q(t); the convolved stiffness load.
inline Vec convolved_load(const History& hist, const AssembledOperators& ops, double t) {
  Vec q = hist.convolved_q(t);
  return ops.K_stiff.apply(q);
}

// (g o grad u)(t): always nonnegative.
inline double g_circ_grad(const History& hist, const AssembledOperators& ops,
                          const Vec& u_now, double t) {
  return hist.scan(ops, u_now, t).g_circ;
}

}  // namespace vkwave
