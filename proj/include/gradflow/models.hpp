#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "gradflow/errors.hpp"
#include "gradflow/grid.hpp"
#include "gradflow/spectral.hpp"

namespace gradflow {

/// L2 flow: G = I (Allen-Cahn, MBE). H^-1 flow: G = -Laplacian (Cahn-Hilliard).
enum class FlowKind { L2, Hm1 };

enum class PotentialType {
  DoubleWell,  ///< F(phi) = scale/4 (phi^2 - 1)^2
  MbeSlope,    ///< F(y) = 1/4 (|y|^2 - 1)^2 evaluated at y = grad phi
  MbeNoSlope,  ///< F(y) = -1/2 ln(1 + |y|^2) evaluated at y = grad phi
};

struct Potential {
  PotentialType type = PotentialType::DoubleWell;
  double scale = 1.0;

  static Potential double_well(double scale = 1.0) { return {PotentialType::DoubleWell, scale}; }
  static Potential mbe_slope() { return {PotentialType::MbeSlope, 1.0}; }
  static Potential mbe_no_slope() { return {PotentialType::MbeNoSlope, 1.0}; }

  bool acts_on_gradient() const noexcept { return type != PotentialType::DoubleWell; }
};

/// Parameters of the abstract gradient flow
///   phi_t = -M G mu,  mu = eps2 A phi + F'(phi),  E = eps2/2 (A phi, phi) + int F.
struct ModelSpec {
  FlowKind flow = FlowKind::L2;
  OperatorKind a_kind = OperatorKind::NegLaplacian;
  double eps2 = 1e-4;
  double mobility = 1.0;
  Potential potential;
  /// Energy shift C; unset means "choose max(1, 1 - E(phi0)) at initialization".
  std::optional<double> energy_shift;
  /// First-order PS-SAV stabilizing constant s.
  double stabilizer = 1.0;
  /// 2/3-rule truncation of the nonlinear force.
  bool dealias = false;

  void validate() const {
    if (!(eps2 > 0.0)) throw ConfigError("eps2 must be positive");
    if (!(mobility > 0.0)) throw ConfigError("mobility M must be positive");
    if (!(stabilizer >= 0.0)) throw ConfigError("stabilizer s must be non-negative");
    if (!(potential.scale > 0.0)) throw ConfigError("potential scale must be positive");
    if (potential.acts_on_gradient() && a_kind != OperatorKind::Bilaplacian) {
      throw ConfigError("MBE potentials need the bilaplacian surface-diffusion term");
    }
  }

  double shift() const {
    if (!energy_shift) throw ConfigError("energy shift C has not been resolved");
    return *energy_shift;
  }
};

/// A ModelSpec bound to a grid, with its operator symbols precomputed.
class Model {
 public:
  Model(ModelSpec spec, const Grid& grid)
      : spec_(std::move(spec)),
        grid_(grid),
        a_(OperatorSpectrum::of(grid, spec_.a_kind)),
        g_(OperatorSpectrum::laplacian_power(grid, spec_.flow == FlowKind::Hm1 ? 1 : 0)),
        ga_(OperatorSpectrum::laplacian_power(grid, a_.power() + g_.power())) {
    spec_.validate();
  }

  const ModelSpec& spec() const noexcept { return spec_; }
  const Grid& grid() const noexcept { return grid_; }
  /// The elliptic operator A of the quadratic energy.
  const OperatorSpectrum& a() const noexcept { return a_; }
  /// The metric operator G (identity for L2 flows).
  const OperatorSpectrum& g() const noexcept { return g_; }
  /// The composition G A.
  const OperatorSpectrum& ga() const noexcept { return ga_; }

  double eps2() const noexcept { return spec_.eps2; }
  double mobility() const noexcept { return spec_.mobility; }
  double shift() const { return spec_.shift(); }
  bool is_hm1() const noexcept { return spec_.flow == FlowKind::Hm1; }

  Model with_shift(double c) const {
    Model m = *this;
    m.spec_.energy_shift = c;
    return m;
  }

  /// G f (identity for L2 flows).
  RealField apply_g(const RealField& f) const { return is_hm1() ? apply_operator(f, g_) : f; }

  /// The flow's metric product (f, g)_G: L2 product, or the H^-1 product for H^-1 flows.
  double metric_inner(const RealField& f, const RealField& g) const {
    return is_hm1() ? inner_Hm1(f, g) : inner_L2(f, g);
  }

  void check_field(const RealField& f) const {
    if (!(f.grid() == grid_)) throw SizeMismatch("field grid differs from model grid");
  }

 private:
  ModelSpec spec_;
  Grid grid_;
  OperatorSpectrum a_;
  OperatorSpectrum g_;
  OperatorSpectrum ga_;
};

namespace detail {

inline double double_well(double phi, double scale) noexcept {
  const double w = phi * phi - 1.0;
  return 0.25 * scale * w * w;
}

inline double gradient_potential(PotentialType type, double gx, double gy) noexcept {
  const double s = gx * gx + gy * gy;
  if (type == PotentialType::MbeSlope) return 0.25 * (s - 1.0) * (s - 1.0);
  return -0.5 * std::log1p(s);
}

/// Factor k with F'(y) = k(|y|^2) y.
inline double gradient_potential_slope(PotentialType type, double s) noexcept {
  if (type == PotentialType::MbeSlope) return s - 1.0;
  return -1.0 / (1.0 + s);
}

inline double grid_integral(const RealField& f) {
  const double h = f.grid().spacing();
  return f.sum() * h * h;
}

inline void check_finite_energy(double e) {
  if (!std::isfinite(e)) throw NumericalBlowup("non-finite energy", -1);
}

}  // namespace detail

/// E_1(phi) = int F, the nonlinear part of the energy.
inline double energy_nonlinear(const RealField& phi, const Model& m) {
  m.check_field(phi);
  const Potential& pot = m.spec().potential;
  double e = 0.0;
  if (!pot.acts_on_gradient()) {
    e = detail::grid_integral(phi.map([&](double v) { return detail::double_well(v, pot.scale); }));
  } else {
    const auto [gx, gy] = gradient(phi);
    double acc = 0.0;
    for (std::size_t k = 0; k < phi.size(); ++k) {
      acc += detail::gradient_potential(pot.type, gx[k], gy[k]);
    }
    const double h = phi.grid().spacing();
    e = acc * h * h;
  }
  detail::check_finite_energy(e);
  return e;
}

/// eps2/2 (A phi, phi).
inline double energy_quadratic(const RealField& phi, const Model& m) {
  m.check_field(phi);
  return 0.5 * m.eps2() * quadratic_form(to_spectral(phi), m.a());
}

inline double energy_total(const RealField& phi, const Model& m) {
  const double e = energy_quadratic(phi, m) + energy_nonlinear(phi, m);
  detail::check_finite_energy(e);
  return e;
}

/// Variational derivative of E_1: scale (phi^3 - phi) for the double well,
/// -div F'(grad phi) for the MBE potentials.
inline RealField nonlinear_force(const RealField& phi, const Model& m) {
  m.check_field(phi);
  const Potential& pot = m.spec().potential;
  RealField out(phi.grid());
  if (!pot.acts_on_gradient()) {
    out = phi.map([&](double v) { return pot.scale * (v * v * v - v); });
  } else {
    auto [gx, gy] = gradient(phi);
    for (std::size_t k = 0; k < phi.size(); ++k) {
      const double kf = detail::gradient_potential_slope(pot.type, gx[k] * gx[k] + gy[k] * gy[k]);
      gx[k] *= kf;
      gy[k] *= kf;
    }
    out = divergence(gx, gy);
    out *= -1.0;
  }
  if (m.spec().dealias) out = dealias_two_thirds(out);
  return out;
}

/// mu = eps2 A phi + nonlinear_force(phi).
inline RealField chemical_potential(const RealField& phi, const Model& m) {
  RealField mu = apply_operator(phi, m.a());
  mu *= m.eps2();
  mu += nonlinear_force(phi, m);
  return mu;
}

/// Manufactured exact solutions on (0, 2)^2.
enum class ManufacturedCase {
  AcCaseA,  ///< exp(sin(pi x) sin(pi y)) sin t
  ChCaseA,  ///< cos(pi x) cos(pi y) sin t
};

inline std::string to_string(ManufacturedCase c) {
  return c == ManufacturedCase::AcCaseA ? "ac-a" : "ch-a";
}

namespace detail {
inline double manufactured_profile(ManufacturedCase c, double x, double y) noexcept {
  if (c == ManufacturedCase::AcCaseA) return std::exp(std::sin(M_PI * x) * std::sin(M_PI * y));
  return std::cos(M_PI * x) * std::cos(M_PI * y);
}
}  // namespace detail

inline RealField exact_solution(ManufacturedCase c, const Grid& grid, double t) {
  const double st = std::sin(t);
  return RealField::sample(grid, [&](double x, double y) { return detail::manufactured_profile(c, x, y) * st; });
}

inline RealField exact_time_derivative(ManufacturedCase c, const Grid& grid, double t) {
  const double ct = std::cos(t);
  return RealField::sample(grid, [&](double x, double y) { return detail::manufactured_profile(c, x, y) * ct; });
}

/// f = d/dt phi_e + M G mu(phi_e), the source that makes phi_e an exact solution.
inline RealField forcing(ManufacturedCase c, const Model& m, double t) {
  RealField f = exact_time_derivative(c, m.grid(), t);
  const RealField mu = chemical_potential(exact_solution(c, m.grid(), t), m);
  f.axpy(m.mobility(), m.apply_g(mu));
  return f;
}

}  // namespace gradflow
