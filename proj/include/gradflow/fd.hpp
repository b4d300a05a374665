#pragma once

#include <cmath>
#include <cstddef>
#include <utility>

#include "gradflow/errors.hpp"
#include "gradflow/grid.hpp"
#include "gradflow/models.hpp"
#include "gradflow/schemes.hpp"

// Finite-difference counterparts of the spectral operators: five-point
// Laplacian, staggered forward-difference gradient, and the fully discrete
// first-order PS-SAV scheme for Allen-Cahn type L2 flows.

namespace gradflow::fd {

/// Grid function with periodic wraparound; same storage as RealField.
using FDField = RealField;

namespace detail {

inline std::size_t wrap(std::size_t i, long offset, std::size_t n) noexcept {
  const long m = static_cast<long>(n);
  return static_cast<std::size_t>(((static_cast<long>(i) + offset) % m + m) % m);
}

}  // namespace detail

/// (u_{i+1,j} + u_{i-1,j} + u_{i,j+1} + u_{i,j-1} - 4 u_{i,j}) / h^2
inline FDField laplacian_fd(const FDField& u) {
  const Grid& g = u.grid();
  const std::size_t n = g.n();
  const double inv_h2 = 1.0 / (g.spacing() * g.spacing());
  FDField out(g);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ip = detail::wrap(i, 1, n);
    const std::size_t im = detail::wrap(i, -1, n);
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t jp = detail::wrap(j, 1, n);
      const std::size_t jm = detail::wrap(j, -1, n);
      out(i, j) = (u(ip, j) + u(im, j) + u(i, jp) + u(i, jm) - 4.0 * u(i, j)) * inv_h2;
    }
  }
  return out;
}

/// Forward differences onto the half nodes: first holds (u_{i+1,j} - u_{i,j})/h at
/// (i+1/2, j), second holds (u_{i,j+1} - u_{i,j})/h at (i, j+1/2).
inline std::pair<FDField, FDField> gradient_fd(const FDField& u) {
  const Grid& g = u.grid();
  const std::size_t n = g.n();
  const double inv_h = 1.0 / g.spacing();
  FDField dx(g);
  FDField dy(g);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ip = detail::wrap(i, 1, n);
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t jp = detail::wrap(j, 1, n);
      dx(i, j) = (u(ip, j) - u(i, j)) * inv_h;
      dy(i, j) = (u(i, jp) - u(i, j)) * inv_h;
    }
  }
  return {std::move(dx), std::move(dy)};
}

/// (u, v)_m = h^2 sum u_{ij} v_{ij}
inline double inner_m(const FDField& u, const FDField& v) {
  u.check_same(v);
  double acc = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) acc += u[k] * v[k];
  const double h = u.grid().spacing();
  return acc * h * h;
}

/// Products of edge functions on the x- and y-staggered grids. On a periodic
/// grid both reduce to the same h^2-weighted sum over edge values.
inline double inner_x(const FDField& f, const FDField& g) { return inner_m(f, g); }
inline double inner_y(const FDField& f, const FDField& g) { return inner_m(f, g); }

/// ||grad_h u||_TM^2 = (D_x u, D_x u)_x + (D_y u, D_y u)_y
inline double grad_norm_tm_sq(const FDField& u) {
  const auto [dx, dy] = gradient_fd(u);
  return inner_x(dx, dx) + inner_y(dy, dy);
}

struct CgResult {
  FDField x;
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Unpreconditioned CG for (I + c(-Laplacian_h)) x = rhs, c >= 0.
/// Stops at relative residual 1e-12; more than 10 * n^2 iterations is a stall.
inline CgResult cg_solve_shifted_fd(const FDField& rhs, double c, double tol = 1e-12) {
  if (!(c >= 0.0)) throw InvalidArgument("cg_solve_shifted_fd needs c >= 0");
  const Grid& g = rhs.grid();
  auto apply = [&](const FDField& v) {
    FDField out = v;
    out.axpy(-c, laplacian_fd(v));
    return out;
  };
  const double bnorm = std::sqrt(inner_m(rhs, rhs));
  CgResult res{FDField(g), 0, 0.0};
  if (bnorm == 0.0) return res;

  FDField r = rhs;
  FDField p = r;
  double rr = inner_m(r, r);
  const long max_iter = 10 * static_cast<long>(g.size());
  for (long it = 0; it < max_iter; ++it) {
    if (std::sqrt(rr) <= tol * bnorm) {
      res.relative_residual = std::sqrt(rr) / bnorm;
      return res;
    }
    const FDField ap = apply(p);
    const double alpha = rr / inner_m(p, ap);
    res.x.axpy(alpha, p);
    r.axpy(-alpha, ap);
    const double rr_new = inner_m(r, r);
    p *= rr_new / rr;
    p += r;
    rr = rr_new;
    ++res.iterations;
  }
  if (std::sqrt(rr) <= tol * bnorm) {
    res.relative_residual = std::sqrt(rr) / bnorm;
    return res;
  }
  throw SolverStall("conjugate gradients did not reach the residual tolerance");
}

inline void require_fd_model(const Model& m) {
  const ModelSpec& s = m.spec();
  if (s.flow != FlowKind::L2 || s.a_kind != OperatorKind::NegLaplacian ||
      s.potential.type != PotentialType::DoubleWell) {
    throw InvalidArgument("finite-difference scheme covers Allen-Cahn type L2 models only");
  }
}

/// E_h = eps2/2 ||grad_h phi||_TM^2 + (F(phi), 1)_m
inline double energy_fd(const FDField& phi, const Model& m) {
  require_fd_model(m);
  m.check_field(phi);
  const double scale = m.spec().potential.scale;
  const double h = phi.grid().spacing();
  double acc = 0.0;
  for (std::size_t k = 0; k < phi.size(); ++k) acc += gradflow::detail::double_well(phi[k], scale);
  const double e = 0.5 * m.eps2() * grad_norm_tm_sq(phi) + acc * h * h;
  gradflow::detail::check_finite_energy(e);
  return e;
}

/// mu_h = eps2 (-Laplacian_h) phi + F'(phi)
inline FDField chemical_potential_fd(const FDField& phi, const Model& m) {
  const double scale = m.spec().potential.scale;
  FDField mu = laplacian_fd(phi);
  mu *= -m.eps2();
  for (std::size_t k = 0; k < phi.size(); ++k) mu[k] += scale * (phi[k] * phi[k] * phi[k] - phi[k]);
  return mu;
}

inline SimState init_state_fd(const FDField& phi0, const Model& m) {
  SimState s{phi0, std::nullopt, 0.0, 0.0, 0, std::nullopt};
  const double e = energy_fd(phi0, m);
  gradflow::detail::require_positive_shifted(e + m.shift(), "E_h(phi0)");
  s.energy = e;
  s.aux = e + m.shift();
  return s;
}

/// Fully discrete first-order PS-SAV with the five-point Laplacian.
inline StepReport step_pssav1_fd(const SimState& s, const Model& m, double dt, const StepOptions& opt = {}) {
  require_fd_model(m);
  m.check_field(s.phi);
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  const double mob = m.mobility();
  const double e_now = s.energy ? *s.energy : energy_fd(s.phi, m);
  const double denom = e_now + m.shift();
  gradflow::detail::require_positive_shifted(denom, "E_h(phi^n)");

  FDField rhs = chemical_potential_fd(s.phi, m);
  rhs *= -mob / denom;
  const FDField phi1 = cg_solve_shifted_fd(rhs, mob * m.spec().stabilizer * dt * m.eps2()).x;
  const double a = inner_m(phi1, phi1);

  StepReport r{SimState{s.phi, std::nullopt, s.aux, s.t + dt, s.step_index + 1, e_now}};
  r.quad = QuadCoeffs{a, mob / dt, -mob / dt * s.aux};
  if (a <= gradflow::detail::degenerate_threshold(s.phi, dt)) {
    r.flags = kQuadraticDegenerate;
    r.quad.a = 0.0;
    r.xi = s.aux / denom;
    return r;
  }
  r.state.aux = opt.root(r.quad);
  r.state.phi.axpy(dt * r.state.aux, phi1);
  r.state.energy = energy_fd(r.state.phi, m);
  r.xi = r.state.aux / (*r.state.energy + m.shift());
  r.dissipation = s.aux - r.state.aux;
  const FDField diff = r.state.phi - s.phi;
  r.rate_norm_sq = inner_m(diff, diff) / (dt * dt);
  return r;
}

}  // namespace gradflow::fd
