#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "test_util.hpp"
#include "vkwave/analysis.hpp"

using namespace vkwave;
using Catch::Approx;

TEST_CASE("fit_decay on exact synthetic data") {
  SECTION("exponential law") {
    Vec t, E;
    for (int i = 0; i <= 500; ++i) {
      double ti = 0.01 * i;
      t.push_back(ti);
      E.push_back(3.0 * std::exp(-2.0 * ti));
    }
    DecayFit f = fit_decay(t, E, RateFunction::constant(1.0), 0.0);
    CHECK(f.k_fit == Approx(2.0).margin(1e-6));
    CHECK(f.K_fit == Approx(3.0).margin(1e-6));
    CHECK(f.r_squared > 1.0 - 1e-10);
  }

  SECTION("polynomial law against the hyperbolic rate") {
    Vec t, E;
    for (int i = 0; i <= 500; ++i) {
      double ti = 0.01 * i;
      t.push_back(ti);
      E.push_back(std::pow(1.0 + ti, -3.0));
    }
    DecayFit f = fit_decay(t, E, RateFunction::hyperbolic(1.0), 0.0);
    CHECK(f.k_fit == Approx(3.0).margin(1e-6));
    CHECK(f.K_fit == Approx(1.0).margin(1e-6));
    CHECK(f.r_squared > 1.0 - 1e-10);
  }

  SECTION("window truncation and the 10-point floor") {
    Vec t, E;
    for (int i = 0; i < 30; ++i) {
      t.push_back(0.1 * i);
      E.push_back(i < 15 ? std::exp(-0.1 * i) : -1.0);  // nonpositive tail
    }
    DecayFit f = fit_decay(t, E, RateFunction::constant(1.0), 0.0);
    CHECK(f.n_points == 15);
    CHECK_THROWS_AS(fit_decay(Vec{0, 1, 2}, Vec{1, 0.5, 0.25},
                              RateFunction::constant(1.0), 0.0),
                    fit_error);
  }
}

TEST_CASE("embedding constant for p = 2 approaches 2/pi from below") {
  const double two_over_pi = 0.636619772367581343;
  double prev_change = 1.0, prev = 0.0;
  for (std::size_t n : {32u, 64u, 128u}) {
    AssembledOperators ops = assemble(build_mesh(1.0, n));
    double c = estimate_embedding_constant(ops, 2.0, 8, 42);
    CHECK(c < two_over_pi + 1e-12);
    if (prev > 0.0) {
      double change = c - prev;
      CHECK(change >= -1e-12);        // monotone from below
      CHECK(change < prev_change);    // shrinking increments
      prev_change = change;
    } else {
      prev_change = two_over_pi - c + 1e-30;
    }
    prev = c;
  }
  CHECK(std::abs(prev - two_over_pi) < 1e-3);
}

TEST_CASE("embedding constant for p = 4 dominates a dense random sample") {
  AssembledOperators ops = assemble(build_mesh(1.0, 32));
  double cstar = estimate_embedding_constant(ops, 4.0, 12, 42);
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Vec u(ops.mesh.n_free());
  double best = 0.0;
  for (int s = 0; s < 100000; ++s) {
    for (double& v : u) v = unif(rng);
    double den = ops.K_stiff.quad_form(u);
    if (!(den > 0.0)) continue;
    double num = lp_norm_p(ops.mesh, to_full(ops.mesh, u), 4.0);
    best = std::max(best, std::pow(num, 0.25) / std::sqrt(den));
  }
  CHECK(best <= cstar + 1e-6);
}

TEST_CASE("direction_sup matches the closed form for b = 0") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unif(0.2, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    double a = unif(rng), S = unif(rng), P = unif(rng), p = 2.5 + unif(rng);
    double sup = detail::direction_sup(a, 0.0, p, S, P);
    double closed = (0.5 - 1.0 / p) *
                    std::pow(a * S, p / (p - 2.0)) / std::pow(P, 2.0 / (p - 2.0));
    CHECK(sup == Approx(closed).epsilon(1e-8));
  }
}

TEST_CASE("direction_sup is invariant under rescaling the direction") {
  // replacing u by 3u maps (S, P) to (9S, 3^p P) and leaves the sup alone
  double a = 1.3, b = 0.2, p = 4.5, S = 0.8, P = 1.7;
  double s1 = detail::direction_sup(a, b, p, S, P);
  double s2 = detail::direction_sup(a, b, p, 9.0 * S, std::pow(3.0, p) * P);
  CHECK(s1 == Approx(s2).epsilon(1e-10));
}

TEST_CASE("direction_sup detects unbounded profiles") {
  // p < 4 with b > 0: the quartic term wins, no finite maximizer
  CHECK(std::isinf(detail::direction_sup(1.0, 0.5, 3.0, 1.0, 1.0)));
}

TEST_CASE("depth estimate decreases weakly under mesh refinement") {
  double d_coarse, d_fine;
  {
    AssembledOperators ops = assemble(build_mesh(1.0, 32));
    d_coarse = estimate_depth_d1(ops, 1.0, 0.0, 4.0, 8, 42);
  }
  {
    AssembledOperators ops = assemble(build_mesh(1.0, 64));
    d_fine = estimate_depth_d1(ops, 1.0, 0.0, 4.0, 8, 42);
  }
  CHECK(std::isfinite(d_coarse));
  CHECK(d_fine <= d_coarse + 1e-8);
  // for b = 0 the depth is tied to the embedding constant
  AssembledOperators ops = assemble(build_mesh(1.0, 64));
  double cstar = estimate_embedding_constant(ops, 4.0, 8, 42);
  double closed = 0.25 * std::pow(cstar, -4.0);  // (1/2 - 1/p) C*^(-2p/(p-2)) at p = 4
  CHECK(d_fine == Approx(closed).epsilon(1e-4));
}

TEST_CASE("classify") {
  SECTION("zero data is Indeterminate") {
    ProblemConfig cfg = testutil::quiet_config();
    cfg.source_on = true;
    cfg.n_starts = 8;
    AssembledOperators ops = assemble(build_mesh(cfg.L, cfg.n_elems));
    Classification c = classify(cfg, ops);
    CHECK(c.verdict == Classification::Verdict::Indeterminate);
    CHECK_FALSE(c.note.empty());
  }

  SECTION("tiny data lands in the stable set") {
    ProblemConfig cfg = testutil::quiet_config();
    cfg.source_on = true;
    cfg.a = 1.0;
    cfg.p = 4.0;
    cfg.kernel = RelaxationKernel::exponential(0.25, 1.0);
    cfg.n_starts = 8;
    SpatialMesh mesh = build_mesh(cfg.L, cfg.n_elems);
    cfg.u0_nodal = testutil::interpolate(mesh, [](double x) { return 1e-3 * x; });
    AssembledOperators ops = assemble(mesh);
    Classification c = classify(cfg, ops);
    CHECK(c.verdict == Classification::Verdict::StableSet);
    CHECK(c.I0 > 0.0);
    CHECK(c.condition_42_lhs < 1.0);
  }

  SECTION("amplitude chosen by bisection gives negative energy") {
    ProblemConfig cfg = testutil::quiet_config();
    cfg.source_on = true;
    cfg.p = 4.0;
    cfg.kernel = RelaxationKernel::exponential(0.1, 1.0);
    cfg.n_starts = 8;
    SpatialMesh mesh = build_mesh(cfg.L, cfg.n_elems);
    AssembledOperators ops = assemble(mesh);
    auto energy_at = [&](double A) {
      Vec u0 = testutil::interpolate(mesh, [&](double x) { return A * x; });
      double grad = ops.K_stiff.quad_form(u0);
      double lp = lp_norm_p(mesh, to_full(mesh, u0), cfg.p);
      double vsq = ops.M_mass.quad_form(u0);
      double vb = boundary_trace(u0);
      return 0.5 * cfg.a * grad - lp / cfg.p + 0.5 * vsq + 0.5 * vb * vb;
    };
    double lo = 1.0, hi = 64.0;
    REQUIRE(energy_at(lo) > 0.0);
    REQUIRE(energy_at(hi) < 0.0);
    for (int it = 0; it < 60; ++it) {
      double mid = 0.5 * (lo + hi);
      (energy_at(mid) > 0.0 ? lo : hi) = mid;
    }
    double A = hi * 1.05;  // safely on the negative side
    cfg.u0_nodal = testutil::interpolate(mesh, [&](double x) { return A * x; });
    cfg.u1_nodal = cfg.u0_nodal;
    Classification c = classify(cfg, ops);
    CHECK(c.E0 < 0.0);
    CHECK(c.verdict == Classification::Verdict::UnstableNegativeEnergy);
  }

  SECTION("past the mountain pass with sub-depth energy: UnstableSubDepth") {
    ProblemConfig cfg = testutil::quiet_config();
    cfg.source_on = true;
    cfg.p = 4.0;
    cfg.b = 0.0;
    cfg.kernel = RelaxationKernel::exponential(0.01, 1.0);
    cfg.n_starts = 8;
    SpatialMesh mesh = build_mesh(cfg.L, cfg.n_elems);
    AssembledOperators ops = assemble(mesh);
    // scale the refined extremal direction just past its mountain pass:
    // I goes negative while J (and hence E) stays below the well depth
    Vec dir = detail::multistart_directions(ops, cfg.p, cfg.n_starts, cfg.seed).front();
    double S = ops.K_stiff.quad_form(dir);
    double P = lp_norm_p(mesh, to_full(mesh, dir), cfg.p);
    double lambda_star = std::sqrt(cfg.a * S / P);
    Vec u0(dir);
    scale(u0, 1.2 * lambda_star);
    Vec u1(dir);
    scale(u1, 0.05);
    cfg.u0_nodal = u0;
    cfg.u1_nodal = u1;
    Classification c = classify(cfg, ops);
    CHECK(c.I0 < 0.0);
    CHECK(c.E0 >= 0.0);
    CHECK(c.E0 < c.d1_estimate);
    CHECK(c.kernel_mass_ok);
    CHECK(c.initial_cross > 0.0);
    CHECK(c.verdict == Classification::Verdict::UnstableSubDepth);
  }

  SECTION("verdict is stable under mesh refinement away from the regime boundary") {
    for (std::size_t n : {32u, 64u}) {
      ProblemConfig cfg = testutil::quiet_config();
      cfg.source_on = true;
      cfg.kernel = RelaxationKernel::exponential(0.25, 1.0);
      cfg.n_elems = n;
      cfg.n_starts = 8;
      SpatialMesh mesh = build_mesh(cfg.L, n);
      cfg.u0_nodal = testutil::interpolate(mesh, [](double x) { return 0.05 * x; });
      AssembledOperators ops = assemble(mesh);
      Classification c = classify(cfg, ops);
      CHECK(c.verdict == Classification::Verdict::StableSet);
      CHECK(std::abs(c.condition_42_lhs - 1.0) > 0.1);
    }
  }
}

TEST_CASE("fit_singularity_time on exact reciprocal data") {
  Vec t, g;
  for (int i = 0; i <= 99; ++i) {
    double ti = 0.01 * i;
    t.push_back(ti);
    g.push_back(1.0 / (1.0 - ti));
  }
  SingularityFit f = fit_singularity_time(t, g);
  REQUIRE(f.ok);
  CHECK(f.q == Approx(2.0));  // grad_sq^(-1) is exactly linear here
  CHECK(f.t_singularity == Approx(1.0).margin(1e-3));
}

TEST_CASE("detect_blowup says no on a decaying run") {
  ProblemConfig cfg = testutil::quiet_config();
  cfg.source_on = true;
  cfg.alpha = 0.1;
  cfg.kernel = RelaxationKernel::exponential(0.25, 1.0);
  cfg.T_final = 1.0;
  cfg.u0_nodal = testutil::sine_mode(cfg, 0.1);
  RunResult r = run(cfg);
  BlowupSummary s = detect_blowup(r, cfg);
  CHECK_FALSE(s.detected);
  CHECK(s.message == "no blow-up detected");
}
