#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "vkwave/common.hpp"
#include "vkwave/kernels.hpp"
#include "vkwave/memory.hpp"

namespace vkwave {

// Full description of one simulation: PDE coefficients, exponents, kernel
// and rate function, initial data, and the numerical knobs.
struct ProblemConfig {
  // coefficients of the equation of motion (all nonnegative, a > 0)
  double a = 1.0;      // base stiffness
  double b = 0.0;      // Kirchhoff gradient-square stiffening
  double sigma = 0.0;  // Balakrishnan-Taylor coefficient
  double alpha = 0.0;  // interior velocity damping
  double beta = 0.0;   // strong (gradient-velocity) damping
  double gamma = 0.0;  // boundary damping coefficient
  double m = 2.0;      // boundary damping exponent, >= 2
  double p = 4.0;      // source exponent, > 2
  bool source_on = true;

  double L = 1.0;
  std::size_t n_elems = 128;

  RelaxationKernel kernel = RelaxationKernel::zero();
  RateFunction xi = RateFunction::constant(1.0);
  bool allow_l_nonpositive = false;  // waiver for blow-up experiments

  std::string u0_expr = "0";
  std::string u1_expr = "0";
  // Resolved nodal initial data on the free dofs; filled from the
  // expressions at setup, or set directly by tests.
  std::optional<Vec> u0_nodal;
  std::optional<Vec> u1_nodal;

  double dt = 1e-3;
  double T_final = 1.0;
  std::size_t output_stride = 10;
  double blowup_threshold = 1e8;  // cutoff on ||grad u||_2^2
  MemoryMode memory_mode = MemoryMode::Direct;
  std::size_t snapshot_budget = 2'000'000;
  std::size_t thin_max = 4096;

  // analysis knobs
  unsigned long seed = 42;
  double eps1 = 0.01;  // Lyapunov diagnostic weights
  double eps2 = 0.01;
  double t0_frac = 0.2;  // decay-fit transient cutoff as fraction of horizon
  std::size_t n_starts = 20;
  std::optional<double> d1_override;
};

// Throws std::invalid_argument on the first violated invariant.
inline void validate(const ProblemConfig& cfg) {
  if (!(cfg.a > 0.0)) throw std::invalid_argument("config: a must be > 0");
  if (cfg.b < 0.0 || cfg.sigma < 0.0 || cfg.alpha < 0.0 || cfg.beta < 0.0 ||
      cfg.gamma < 0.0)
    throw std::invalid_argument("config: coefficients must be nonnegative");
  if (!(cfg.m >= 2.0)) throw std::invalid_argument("config: m must be >= 2");
  if (!(cfg.p > 2.0)) throw std::invalid_argument("config: p must be > 2");
  if (!(cfg.L > 0.0)) throw std::invalid_argument("config: L must be > 0");
  if (cfg.n_elems < 2) throw std::invalid_argument("config: n_elems must be >= 2");
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("config: dt must be > 0");
  if (!(cfg.T_final > 0.0)) throw std::invalid_argument("config: T_final must be > 0");
  if (cfg.output_stride == 0)
    throw std::invalid_argument("config: output_stride must be >= 1");
  if (!(cfg.blowup_threshold > 0.0))
    throw std::invalid_argument("config: blowup_threshold must be > 0");
  if (cfg.memory_mode == MemoryMode::FastExponential &&
      cfg.kernel.family != RelaxationKernel::Family::Exponential)
    throw std::invalid_argument(
        "config: fast_exponential memory mode requires an exponential kernel");
  if (!cfg.allow_l_nonpositive && !(residual_l(cfg.kernel, cfg.a) > 0.0))
    throw std::invalid_argument(
        "config: residual stiffness a - mass(g) must be positive "
        "(set kernel.allow_l_nonpositive to waive for blow-up experiments)");
}

}  // namespace vkwave
