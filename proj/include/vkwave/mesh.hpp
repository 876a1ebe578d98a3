#pragma once

#include <cmath>
#include <cstddef>

#include "vkwave/common.hpp"
#include "vkwave/linalg.hpp"
#include "vkwave/quadrature.hpp"

namespace vkwave {

// Uniform P1 mesh of the interval (0, L). Node 0 carries the homogeneous
// Dirichlet condition; the node at x = L is the dynamic boundary node and
// stays a degree of freedom. Free dofs are nodes 1..n_elems, so a free
// vector has n_elems entries and its last entry is the value at x = L.
struct SpatialMesh {
  double L = 1.0;
  std::size_t n_elems = 0;
  double h = 0.0;
  Vec nodes;  // n_elems + 1 coordinates, nodes[0] = 0, nodes[n_elems] = L

  std::size_t n_free() const { return n_elems; }
};

inline SpatialMesh build_mesh(double L, std::size_t n_elems) {
  if (!(L > 0.0)) throw std::invalid_argument("build_mesh: L must be > 0");
  if (n_elems < 2) throw std::invalid_argument("build_mesh: need at least 2 elements");
  SpatialMesh m;
  m.L = L;
  m.n_elems = n_elems;
  m.h = L / double(n_elems);
  m.nodes.resize(n_elems + 1);
  for (std::size_t i = 0; i <= n_elems; ++i) m.nodes[i] = L * double(i) / double(n_elems);
  m.nodes[0] = 0.0;
  m.nodes[n_elems] = L;
  return m;
}

// Consistent mass and stiffness over the free dofs, plus the point mass
// of the dynamic boundary node (the measure of {L} is 1 in 1-D).
struct AssembledOperators {
  SpatialMesh mesh;
  TriDiag M_mass;   // consistent P1 mass, free dofs
  TriDiag K_stiff;  // P1 stiffness, free dofs
  double boundary_mass = 1.0;
};

inline AssembledOperators assemble(const SpatialMesh& mesh) {
  const std::size_t n = mesh.n_free();
  const double h = mesh.h;
  AssembledOperators ops;
  ops.mesh = mesh;
  ops.M_mass = TriDiag::zeros(n);
  ops.K_stiff = TriDiag::zeros(n);
  for (std::size_t i = 0; i < n; ++i) {
    bool last = (i + 1 == n);
    ops.M_mass.diag[i] = last ? h / 3.0 : 2.0 * h / 3.0;
    ops.K_stiff.diag[i] = last ? 1.0 / h : 2.0 / h;
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    ops.M_mass.off[i] = h / 6.0;
    ops.K_stiff.off[i] = -1.0 / h;
  }
  ops.boundary_mass = 1.0;
  return ops;
}

// ||grad u||_2^2 = u^T K u, exact for P1 fields.
inline double grad_norm_sq(const AssembledOperators& ops, const Vec& u) {
  if (u.size() != ops.mesh.n_free())
    throw std::invalid_argument("grad_norm_sq: vector sized to free dofs expected");
  return ops.K_stiff.quad_form(u);
}

// Value at the dynamic boundary node x = L.
inline double boundary_trace(const Vec& u) {
  return u.empty() ? 0.0 : u.back();
}

// Extend a free-dof vector by the pinned zero at x = 0.
inline Vec to_full(const SpatialMesh& mesh, const Vec& u_free) {
  if (u_free.size() != mesh.n_free())
    throw std::invalid_argument("to_full: vector sized to free dofs expected");
  Vec full(mesh.n_elems + 1, 0.0);
  for (std::size_t i = 0; i < u_free.size(); ++i) full[i + 1] = u_free[i];
  return full;
}

// integral over (0, L) of |u|^p for the P1 interpolant with nodal values
// u_full (the x = 0 entry is part of the input). Per-element Gauss rule
// with ceil((p+1)/2) points, exact for integer p.
inline double lp_norm_p(const SpatialMesh& mesh, const Vec& u_full, double p) {
  if (p < 2.0) throw std::invalid_argument("lp_norm_p: p must be >= 2");
  if (u_full.size() != mesh.n_elems + 1)
    throw std::invalid_argument("lp_norm_p: full nodal vector expected");
  const std::size_t npts = std::size_t(std::ceil((p + 1.0) / 2.0));
  GaussRule rule = gauss_legendre(npts);
  const double h = mesh.h;
  double acc = 0.0;
  for (std::size_t e = 0; e < mesh.n_elems; ++e) {
    double ul = u_full[e], ur = u_full[e + 1];
    double elem = 0.0;
    for (std::size_t q = 0; q < npts; ++q) {
      double s = 0.5 * (rule.nodes[q] + 1.0);  // in [0, 1]
      double val = (1.0 - s) * ul + s * ur;
      elem += rule.weights[q] * std::pow(std::abs(val), p);
    }
    acc += 0.5 * h * elem;
  }
  return acc;
}

// Consistent load vector of |u|^(p-2) u against the P1 basis, returned on
// the free dofs. This is the source term assembly; quadrature order
// matches lp_norm_p so the pair is energy-consistent.
inline Vec power_load(const SpatialMesh& mesh, const Vec& u_full, double p) {
  if (p <= 2.0) throw std::invalid_argument("power_load: p must be > 2");
  if (u_full.size() != mesh.n_elems + 1)
    throw std::invalid_argument("power_load: full nodal vector expected");
  const std::size_t npts = std::size_t(std::ceil((p + 1.0) / 2.0));
  GaussRule rule = gauss_legendre(npts);
  const double h = mesh.h;
  Vec load_full(mesh.n_elems + 1, 0.0);
  for (std::size_t e = 0; e < mesh.n_elems; ++e) {
    double ul = u_full[e], ur = u_full[e + 1];
    for (std::size_t q = 0; q < npts; ++q) {
      double s = 0.5 * (rule.nodes[q] + 1.0);
      double val = (1.0 - s) * ul + s * ur;
      double f = std::pow(std::abs(val), p - 2.0) * val;
      double w = 0.5 * h * rule.weights[q];
      load_full[e] += w * f * (1.0 - s);
      load_full[e + 1] += w * f * s;
    }
  }
  Vec load(mesh.n_free());
  for (std::size_t i = 0; i < load.size(); ++i) load[i] = load_full[i + 1];
  return load;
}

}  // namespace vkwave
