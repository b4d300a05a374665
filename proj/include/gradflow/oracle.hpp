#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>

#include "gradflow/errors.hpp"
#include "gradflow/grid.hpp"
#include "gradflow/models.hpp"
#include "gradflow/schemes.hpp"

// Brute-force reference for small grids. Operators are explicit dense
// matrices (DFT sums or the five-point stencil), linear systems go through
// dense LU, and every scheme is re-derived from its defining equations.

namespace gradflow::oracle {

enum class Assembly { FdStencil, DftDiagonal };

struct DenseOperator {
  Eigen::MatrixXd matrix;
  Assembly assembly = Assembly::DftDiagonal;
};

namespace detail {

inline void guard(const Grid& g) {
  if (g.n() > 16) throw InvalidArgument("dense oracle is limited to n <= 16");
}

inline Eigen::VectorXd to_vec(const RealField& f) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(f.size()));
  for (std::size_t k = 0; k < f.size(); ++k) v(static_cast<Eigen::Index>(k)) = f[k];
  return v;
}

inline RealField to_field(const Grid& g, const Eigen::VectorXd& v) {
  RealField f(g);
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = v(static_cast<Eigen::Index>(k));
  return f;
}

/// Real matrix of the Fourier multiplier with an even symbol sym(kx, ky):
/// M[(i,j),(k,l)] = 1/N sum_{p,q} sym cos(kx_p (x_i - x_k) + ky_q (y_j - y_l)).
inline Eigen::MatrixXd even_multiplier(const Grid& g, const std::function<double(long, long)>& sym) {
  const std::size_t n = g.n();
  const double two_pi = 2.0 * M_PI;
  Eigen::MatrixXd kernel(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t di = 0; di < n; ++di) {
    for (std::size_t dj = 0; dj < n; ++dj) {
      double acc = 0.0;
      for (std::size_t p = 0; p < n; ++p) {
        const long mp = p < n / 2 ? static_cast<long>(p) : static_cast<long>(p) - static_cast<long>(n);
        for (std::size_t q = 0; q < n; ++q) {
          const long mq = q < n / 2 ? static_cast<long>(q) : static_cast<long>(q) - static_cast<long>(n);
          const double phase = two_pi * static_cast<double>(mp * static_cast<long>(di) + mq * static_cast<long>(dj)) /
                               static_cast<double>(n);
          acc += sym(mp, mq) * std::cos(phase);
        }
      }
      kernel(static_cast<Eigen::Index>(di), static_cast<Eigen::Index>(dj)) = acc / static_cast<double>(n * n);
    }
  }
  const auto N = static_cast<Eigen::Index>(n * n);
  Eigen::MatrixXd out(N, N);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t l = 0; l < n; ++l) {
          out(static_cast<Eigen::Index>(i * n + j), static_cast<Eigen::Index>(k * n + l)) =
              kernel(static_cast<Eigen::Index>((i + n - k) % n), static_cast<Eigen::Index>((j + n - l) % n));
        }
      }
    }
  }
  return out;
}

/// 1D spectral first derivative with the Nyquist mode removed.
inline Eigen::MatrixXd derivative_1d(const Grid& g) {
  const std::size_t n = g.n();
  const auto ni = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(ni, ni);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      double acc = 0.0;
      for (long m = -static_cast<long>(n) / 2 + 1; m < static_cast<long>(n) / 2; ++m) {
        const double km = 2.0 * M_PI * static_cast<double>(m) / g.length();
        acc -= km * std::sin(km * (g.coord(i) - g.coord(k)));
      }
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = acc / static_cast<double>(n);
    }
  }
  return d;
}

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline Eigen::MatrixXd fd_neg_laplacian(const Grid& g) {
  const std::size_t n = g.n();
  const auto N = static_cast<Eigen::Index>(n * n);
  const double inv_h2 = 1.0 / (g.spacing() * g.spacing());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(N, N);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto row = static_cast<Eigen::Index>(i * n + j);
      m(row, row) += 4.0 * inv_h2;
      const std::size_t nb[4][2] = {{(i + 1) % n, j}, {(i + n - 1) % n, j}, {i, (j + 1) % n}, {i, (j + n - 1) % n}};
      for (const auto& c : nb) m(row, static_cast<Eigen::Index>(c[0] * n + c[1])) -= inv_h2;
    }
  }
  return m;
}

}  // namespace detail

inline DenseOperator assemble(const Grid& grid, OperatorKind kind, Assembly assembly) {
  detail::guard(grid);
  const int power = static_cast<int>(kind);
  if (assembly == Assembly::FdStencil) {
    const Eigen::MatrixXd lap = detail::fd_neg_laplacian(grid);
    return {power == 1 ? lap : Eigen::MatrixXd(lap * lap), assembly};
  }
  const double k0 = 2.0 * M_PI / grid.length();
  return {detail::even_multiplier(grid,
                                  [&](long p, long q) {
                                    const double k2 = k0 * k0 * static_cast<double>(p * p + q * q);
                                    return std::pow(k2, power);
                                  }),
          assembly};
}

/// Dense model: operators, energy and forces assembled without the FFT path.
class DenseModel {
 public:
  DenseModel(const Model& m, Assembly prov) : grid_(m.grid()), spec_(m.spec()) {
    detail::guard(grid_);
    const auto N = static_cast<Eigen::Index>(grid_.size());
    if (prov == Assembly::FdStencil) {
      if (spec_.flow != FlowKind::L2 || spec_.a_kind != OperatorKind::NegLaplacian ||
          spec_.potential.acts_on_gradient()) {
        throw InvalidArgument("stencil oracle covers Allen-Cahn type L2 models only");
      }
    }
    a_ = assemble(grid_, spec_.a_kind, prov).matrix;
    if (spec_.flow == FlowKind::Hm1) {
      g_ = assemble(grid_, OperatorKind::NegLaplacian, prov).matrix;
      const Eigen::MatrixXd shifted = g_ + Eigen::MatrixXd::Constant(N, N, 1.0 / static_cast<double>(N));
      g_inverse_ = Eigen::PartialPivLU<Eigen::MatrixXd>(shifted);
    } else {
      g_ = Eigen::MatrixXd::Identity(N, N);
    }
    if (spec_.potential.acts_on_gradient()) {
      const Eigen::MatrixXd d1 = detail::derivative_1d(grid_);
      const auto n = static_cast<Eigen::Index>(grid_.n());
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
      dx_ = detail::kron(d1, eye);
      dy_ = detail::kron(eye, d1);
    }
    if (spec_.dealias) {
      const long cut = static_cast<long>(grid_.n()) / 3;
      dealias_ = detail::even_multiplier(grid_, [&](long p, long q) {
        return std::abs(p) <= cut && std::abs(q) <= cut ? 1.0 : 0.0;
      });
    }
    h2_ = grid_.spacing() * grid_.spacing();
  }

  const Grid& grid() const noexcept { return grid_; }
  const ModelSpec& spec() const noexcept { return spec_; }
  const Eigen::MatrixXd& A() const noexcept { return a_; }
  const Eigen::MatrixXd& G() const noexcept { return g_; }
  double shift() const { return spec_.shift(); }

  double dot(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const { return h2_ * f.dot(g); }

  /// (f, g)_G with the H^-1 product taken through (-Laplacian + J/N)^-1.
  double metric(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const {
    if (!g_inverse_) return dot(f, g);
    return h2_ * f.dot(g_inverse_->solve(g));
  }

  double energy_nonlinear(const Eigen::VectorXd& phi) const {
    double acc = 0.0;
    if (!spec_.potential.acts_on_gradient()) {
      for (Eigen::Index k = 0; k < phi.size(); ++k) {
        const double w = phi(k) * phi(k) - 1.0;
        acc += 0.25 * spec_.potential.scale * w * w;
      }
    } else {
      const Eigen::VectorXd gx = dx_ * phi;
      const Eigen::VectorXd gy = dy_ * phi;
      for (Eigen::Index k = 0; k < phi.size(); ++k) {
        const double s = gx(k) * gx(k) + gy(k) * gy(k);
        acc += spec_.potential.type == PotentialType::MbeSlope ? 0.25 * (s - 1.0) * (s - 1.0) : -0.5 * std::log1p(s);
      }
    }
    return h2_ * acc;
  }

  double energy(const Eigen::VectorXd& phi) const {
    return 0.5 * spec_.eps2 * h2_ * phi.dot(a_ * phi) + energy_nonlinear(phi);
  }

  Eigen::VectorXd force(const Eigen::VectorXd& phi) const {
    Eigen::VectorXd out(phi.size());
    if (!spec_.potential.acts_on_gradient()) {
      for (Eigen::Index k = 0; k < phi.size(); ++k) {
        out(k) = spec_.potential.scale * (phi(k) * phi(k) * phi(k) - phi(k));
      }
    } else {
      Eigen::VectorXd gx = dx_ * phi;
      Eigen::VectorXd gy = dy_ * phi;
      for (Eigen::Index k = 0; k < phi.size(); ++k) {
        const double s = gx(k) * gx(k) + gy(k) * gy(k);
        const double kf = spec_.potential.type == PotentialType::MbeSlope ? s - 1.0 : -1.0 / (1.0 + s);
        gx(k) *= kf;
        gy(k) *= kf;
      }
      out = -(dx_ * gx + dy_ * gy);
    }
    if (spec_.dealias) out = dealias_ * out;
    return out;
  }

  Eigen::VectorXd mu(const Eigen::VectorXd& phi) const { return spec_.eps2 * (a_ * phi) + force(phi); }

  /// LU factorization of (alpha I + c G A).
  Eigen::PartialPivLU<Eigen::MatrixXd> shifted(double alpha, double c) const {
    const auto N = static_cast<Eigen::Index>(grid_.size());
    return Eigen::PartialPivLU<Eigen::MatrixXd>(alpha * Eigen::MatrixXd::Identity(N, N) + c * g_ * a_);
  }

 private:
  Grid grid_;
  ModelSpec spec_;
  Eigen::MatrixXd a_;
  Eigen::MatrixXd g_;
  std::optional<Eigen::PartialPivLU<Eigen::MatrixXd>> g_inverse_;
  Eigen::MatrixXd dx_;
  Eigen::MatrixXd dy_;
  Eigen::MatrixXd dealias_;
  double h2_ = 0.0;
};

namespace detail {

/// Both real roots by the textbook formula, each refined by two Newton steps.
inline std::pair<double, double> classical_roots(double a, double b, double c, bool& real) {
  const double disc = b * b - 4.0 * a * c;
  real = disc >= 0.0;
  if (!real) return {-b / (2.0 * a), -b / (2.0 * a)};
  auto polish = [&](double r) {
    for (int i = 0; i < 2; ++i) {
      const double d = 2.0 * a * r + b;
      if (d == 0.0) break;
      r -= ((a * r + b) * r + c) / d;
    }
    return r;
  };
  const double sq = std::sqrt(disc);
  return {polish((-b + sq) / (2.0 * a)), polish((-b - sq) / (2.0 * a))};
}

inline double closest(std::pair<double, double> roots, double target) {
  return std::abs(roots.first - target) <= std::abs(roots.second - target) ? roots.first : roots.second;
}

struct DenseState {
  Eigen::VectorXd phi;
  std::optional<Eigen::VectorXd> prev;
  double aux;
  double t;
};

inline Eigen::VectorXd forcing_at(const Forcing& force, double t) { return to_vec(force(t)); }

inline DenseState sav1(const DenseModel& d, const DenseState& s, double dt, const Forcing& force) {
  const auto N = s.phi.size();
  const double mob = d.spec().mobility;
  const double root = std::sqrt(d.energy_nonlinear(s.phi) + d.shift());
  const Eigen::VectorXd b = d.force(s.phi) / root;
  const double h2 = d.grid().spacing() * d.grid().spacing();

  // Unknowns (phi^{n+1}, q^{n+1}).
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(N + 1, N + 1);
  m.topLeftCorner(N, N) = Eigen::MatrixXd::Identity(N, N) + mob * dt * d.spec().eps2 * d.G() * d.A();
  m.topRightCorner(N, 1) = mob * dt * d.G() * b;
  m.bottomLeftCorner(1, N) = -0.5 * h2 * b.transpose();
  m(N, N) = 1.0;
  Eigen::VectorXd rhs(N + 1);
  rhs.head(N) = s.phi;
  if (force) rhs.head(N) += dt * forcing_at(force, s.t + dt);
  rhs(N) = s.aux - 0.5 * h2 * b.dot(s.phi);
  const Eigen::VectorXd x = m.partialPivLu().solve(rhs);
  return {x.head(N), std::nullopt, x(N), s.t + dt};
}

inline DenseState sav_cn(const DenseModel& d, const DenseState& s, double dt, const Forcing& force) {
  const auto N = s.phi.size();
  const double mob = d.spec().mobility;
  const Eigen::VectorXd hat = 1.5 * s.phi - 0.5 * *s.prev;
  const double root = std::sqrt(d.energy_nonlinear(hat) + d.shift());
  const Eigen::VectorXd b = d.force(hat) / root;
  const double h2 = d.grid().spacing() * d.grid().spacing();
  const Eigen::MatrixXd half = 0.5 * mob * dt * d.spec().eps2 * d.G() * d.A();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(N, N);

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(N + 1, N + 1);
  m.topLeftCorner(N, N) = eye + half;
  m.topRightCorner(N, 1) = 0.5 * mob * dt * d.G() * b;
  m.bottomLeftCorner(1, N) = -0.5 * h2 * b.transpose();
  m(N, N) = 1.0;
  Eigen::VectorXd rhs(N + 1);
  rhs.head(N) = (eye - half) * s.phi - 0.5 * mob * dt * s.aux * (d.G() * b);
  if (force) rhs.head(N) += dt * forcing_at(force, s.t + 0.5 * dt);
  rhs(N) = s.aux - 0.5 * h2 * b.dot(s.phi);
  const Eigen::VectorXd x = m.partialPivLu().solve(rhs);
  return {x.head(N), s.phi, x(N), s.t + dt};
}

inline DenseState gsav(const DenseModel& d, const DenseState& s, double dt, int order, const Forcing& force) {
  const double mob = d.spec().mobility;
  const double alpha = order == 1 ? 1.0 : 1.5;
  const Eigen::VectorXd beta = order == 1 ? s.phi : Eigen::VectorXd(2.0 * s.phi - 0.5 * *s.prev);
  const Eigen::VectorXd hat = order == 1 ? s.phi : Eigen::VectorXd(2.0 * s.phi - *s.prev);
  const Eigen::VectorXd fp = d.force(hat);
  Eigen::VectorXd rhs = beta - mob * dt * (d.G() * fp);
  Eigen::VectorXd f;
  if (force) {
    f = forcing_at(force, s.t + dt);
    rhs += dt * f;
  }
  const Eigen::VectorXd bar = d.shifted(alpha, mob * dt * d.spec().eps2).solve(rhs);
  const Eigen::VectorXd mu = d.spec().eps2 * (d.A() * bar) + fp;
  const double e_hat = d.energy(hat) + d.shift();
  double numer = s.aux;
  if (force) numer += dt * d.dot(mu, f);
  const double r = numer / (1.0 + mob * dt * d.dot(d.G() * mu, mu) / e_hat);
  const double xi = r / e_hat;
  const double eta = 1.0 - std::pow(1.0 - xi, order + 1);
  DenseState out{eta * bar, std::nullopt, r, s.t + dt};
  if (order == 2) out.prev = s.phi;
  return out;
}

inline double degenerate_tol(const DenseModel& d, const Eigen::VectorXd& phi, double dt) {
  return 1e-28 * std::max(1.0, d.dot(phi, phi)) / (dt * dt);
}

inline DenseState pssav1(const DenseModel& d, const DenseState& s, double dt, const Forcing& force) {
  const double mob = d.spec().mobility;
  const double e = d.energy(s.phi);
  const auto lu = d.shifted(1.0, mob * d.spec().stabilizer * dt * d.spec().eps2);
  const Eigen::VectorXd phi1 = lu.solve(-mob * (d.G() * d.mu(s.phi)) / (e + d.shift()));
  const double a = d.metric(phi1, phi1);
  const double b = mob / dt;
  if (!force) {
    if (a <= degenerate_tol(d, s.phi, dt)) return {s.phi, std::nullopt, s.aux, s.t + dt};
    bool real = true;
    const double r = classical_roots(a, b, -b * s.aux, real).first;
    return {s.phi + dt * r * phi1, std::nullopt, r, s.t + dt};
  }
  const Eigen::VectorXd f = forcing_at(force, s.t + dt);
  const Eigen::VectorXd phi2 = lu.solve(f);
  const double bb = b + 2.0 * d.metric(phi1, phi2) - d.metric(f, phi1);
  const double cc = d.metric(phi2, phi2) - d.metric(f, phi2) - b * s.aux;
  bool real = true;
  const double r = closest(classical_roots(a, bb, cc, real), e + d.shift());
  return {s.phi + dt * r * phi1 + dt * phi2, std::nullopt, r, s.t + dt};
}

inline DenseState pssav_cn(const DenseModel& d, const DenseState& s, double dt, const Forcing& force) {
  const double mob = d.spec().mobility;
  const Eigen::VectorXd hat = 1.5 * s.phi - 0.5 * *s.prev;
  const double denom = d.energy(hat) + d.shift();
  const auto lu = d.shifted(1.0, 0.5 * mob * dt * d.spec().eps2);
  const Eigen::VectorXd rhs = d.spec().eps2 * (d.A() * s.phi) + d.force(hat);
  const Eigen::VectorXd phi1 = lu.solve(-mob * (d.G() * rhs) / (2.0 * denom));
  const double a = d.metric(phi1, phi1);
  const double rn = s.aux;
  if (!force && a <= degenerate_tol(d, s.phi, dt)) return {s.phi, s.phi, rn, s.t + dt};

  const double sn = rn * a <= mob / dt ? 0.0 : rn * a / (mob * dt) - 1.0 / (dt * dt);
  const double kappa = mob / dt + mob * sn * dt;
  bool real = true;
  if (!force) {
    // kappa (R^n - R) = a (R + R^n)^2, solved for R
    double c = rn * rn * a - kappa * rn;
    if (sn > 0.0) c = std::min(c, 0.0);
    const double r = classical_roots(a, kappa + 2.0 * rn * a, c, real).first;
    return {s.phi + dt * (r + rn) * phi1, s.phi, r, s.t + dt};
  }
  // Forced: a u^2 + bu u + cu = 0 in u = R + R^n
  const Eigen::VectorXd f = forcing_at(force, s.t + 0.5 * dt);
  const Eigen::VectorXd phi2 = lu.solve(f);
  const double bu = kappa + 2.0 * d.metric(phi1, phi2) - d.metric(f, phi1);
  const double cu = d.metric(phi2, phi2) - d.metric(f, phi2) - 2.0 * kappa * rn;
  const double target = d.energy(s.phi) + d.shift() + rn;
  const double u = closest(classical_roots(a, bu, cu, real), target);
  return {s.phi + dt * u * phi1 + dt * phi2, s.phi, u - rn, s.t + dt};
}

}  // namespace detail

/// Replays one step of `kind` with dense operators. Two-level schemes without
/// phi_prev take their first-order sibling, as the production steppers do.
inline SimState reference_step(const SimState& s, const Model& m, double dt, const SchemeKind& kind,
                               const Forcing& force = {}, Assembly prov = Assembly::DftDiagonal) {
  const DenseModel d(m, prov);
  detail::DenseState ds{detail::to_vec(s.phi), std::nullopt, s.aux, s.t};
  if (s.phi_prev) ds.prev = detail::to_vec(*s.phi_prev);
  const bool two_level = kind.order == Order::Second && ds.prev.has_value();

  detail::DenseState next = [&] {
    switch (kind.family) {
      case Family::Sav:
        return two_level ? detail::sav_cn(d, ds, dt, force) : detail::sav1(d, ds, dt, force);
      case Family::Gsav:
        return detail::gsav(d, ds, dt, two_level ? 2 : 1, force);
      case Family::Pssav:
        return two_level ? detail::pssav_cn(d, ds, dt, force) : detail::pssav1(d, ds, dt, force);
    }
    throw InvalidArgument("unknown scheme family");
  }();
  if (kind.order == Order::Second) next.prev = ds.phi;

  SimState out{detail::to_field(m.grid(), next.phi), std::nullopt, next.aux, next.t, s.step_index + 1,
               d.energy(next.phi)};
  if (next.prev) out.phi_prev = detail::to_field(m.grid(), *next.prev);
  if (kind.relaxed) out.aux = std::min(s.aux, *out.energy + m.shift());
  return out;
}

/// E(phi) through the dense path.
inline double reference_energy(const RealField& phi, const Model& m, Assembly prov = Assembly::DftDiagonal) {
  return DenseModel(m, prov).energy(detail::to_vec(phi));
}

}  // namespace gradflow::oracle
