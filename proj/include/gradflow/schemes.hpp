#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "gradflow/errors.hpp"
#include "gradflow/grid.hpp"
#include "gradflow/models.hpp"
#include "gradflow/spectral.hpp"

namespace gradflow {

enum class Family { Sav, Gsav, Pssav };

/// First order, or second order (Crank-Nicolson for SAV / PS-SAV, BDF2 for GSAV).
enum class Order { First = 1, Second = 2 };

struct SchemeKind {
  Family family = Family::Pssav;
  Order order = Order::First;
  /// Apply the R <- min(R^n, E(phi^{n+1}) + C) calibration after every step.
  bool relaxed = false;

  void validate(const ModelSpec& model) const {
    if (model.potential.acts_on_gradient() && family != Family::Pssav) {
      throw ConfigError("MBE models accept only the pssav scheme family");
    }
    if (relaxed && family == Family::Sav) {
      throw ConfigError("relaxation applies to R-based schemes (gsav, pssav) only");
    }
  }
};

inline std::string to_string(const SchemeKind& k) {
  std::string name = k.family == Family::Sav ? "sav" : k.family == Family::Gsav ? "gsav" : "pssav";
  if (k.relaxed) name = "r" + name;
  return name + (k.order == Order::First ? "1" : "2");
}

/// Trajectory state after step_index steps.
struct SimState {
  RealField phi;
  /// phi^{n-1}, present once a two-level scheme has taken a step.
  std::optional<RealField> phi_prev;
  /// R^n for GSAV / PS-SAV, q^n for baseline SAV.
  double aux = 0.0;
  double t = 0.0;
  long step_index = 0;
  /// Cached E(phi), filled in by the steppers.
  std::optional<double> energy;
};

enum SolverFlag : unsigned {
  kNoFlags = 0,
  kQuadraticDegenerate = 1u << 0,
  kForcedRootFallback = 1u << 1,
};

inline std::string flags_to_string(unsigned flags) {
  std::string out;
  if (flags & kQuadraticDegenerate) out += "QUADRATIC_DEGENERATE";
  if (flags & kForcedRootFallback) out += std::string(out.empty() ? "" : "|") + "FORCED_ROOT_FALLBACK";
  return out;
}

/// Scalar quadratic a R^2 + b R + c = 0.
struct QuadCoeffs {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  double residual(double r) const noexcept { return (a * r + b) * r + c; }
};

struct StepReport {
  explicit StepReport(SimState s) : state(std::move(s)) {}

  SimState state;
  /// Consistency indicator: aux over its defining energy expression.
  double xi = 1.0;
  /// aux^n - aux^{n+1}.
  double dissipation = 0.0;
  unsigned flags = kNoFlags;
  /// Quadratic solved for R (PS-SAV only; zero otherwise).
  QuadCoeffs quad;
  /// Adaptive stabilizer s^{n+1} of the Crank-Nicolson PS-SAV schemes.
  double stabilizer = 0.0;
  /// Metric norm squared of (phi^{n+1} - phi^n)/dt.
  double rate_norm_sq = 0.0;
};

/// Source term evaluated at a time; an empty function means unforced.
using Forcing = std::function<RealField(double)>;

using RootSolver = double (*)(const QuadCoeffs&);

/// Positive root of a R^2 + b R + c = 0 for the unforced PS-SAV quadratics
/// (a >= 0, b > 0, c <= 0). The form -2c / (b + sqrt(disc)) has no cancellation,
/// so it stays accurate as a -> 0.
inline double solve_R_quadratic(const QuadCoeffs& q) {
  if (q.a < 0.0) throw InvalidArgument("quadratic leading coefficient must be non-negative");
  if (q.a == 0.0) {
    if (q.b == 0.0) throw InvalidArgument("degenerate quadratic with b = 0");
    return -q.c / q.b;
  }
  const double disc = q.b * q.b - 4.0 * q.a * q.c;
  if (disc < 0.0) throw NegativeDiscriminant("quadratic for R has no real root");
  const double sq = std::sqrt(disc);
  if (q.c <= 0.0) {
    const double denom = q.b + sq;
    if (denom == 0.0) return 0.0;
    return -2.0 * q.c / denom;
  }
  return (-q.b + sq) / (2.0 * q.a);
}

struct StepOptions {
  RootSolver root = &solve_R_quadratic;
};

namespace detail {

inline void require_positive_shifted(double value, const char* what) {
  if (!(value > 0.0)) {
    throw EnergyShiftViolation(std::string(what) + " + C must be positive, got " + std::to_string(value));
  }
}

inline double energy_of(const SimState& s, const Model& m) {
  return s.energy ? *s.energy : energy_total(s.phi, m);
}

/// phi_1 == 0 test realized in floating point.
inline double degenerate_threshold(const RealField& phi, double dt) {
  return 1e-28 * std::max(1.0, inner_L2(phi, phi)) / (dt * dt);
}

/// Real root of a R^2 + b R + c closest to target; vertex with a flag when none is real.
inline double closest_root(const QuadCoeffs& q, double target, unsigned& flags) {
  if (q.a == 0.0) return -q.c / q.b;
  const double disc = q.b * q.b - 4.0 * q.a * q.c;
  if (disc < 0.0) {
    flags |= kForcedRootFallback;
    return -q.b / (2.0 * q.a);
  }
  const double sq = std::sqrt(disc);
  const double w = -0.5 * (q.b + std::copysign(sq, q.b));
  const double r1 = w / q.a;
  const double r2 = w != 0.0 ? q.c / w : r1;
  return std::abs(r1 - target) <= std::abs(r2 - target) ? r1 : r2;
}

/// ||(phi^{n+1} - phi^n)/dt||_G^2. Under H^-1 the mean is projected out first,
/// since GSAV's rescaling does not conserve it.
inline double rate_norm_sq(const RealField& next, const RealField& cur, const Model& m, double dt) {
  RealField diff = next - cur;
  if (m.is_hm1()) {
    const double mean = diff.mean();
    diff = diff.map([mean](double v) { return v - mean; });
  }
  return m.metric_inner(diff, diff) / (dt * dt);
}

inline RealField extrapolate(const RealField& cur, const RealField& prev, double wc, double wp) {
  RealField out = cur;
  out *= wc;
  out.axpy(wp, prev);
  return out;
}

}  // namespace detail

/// Initial auxiliary variable: q0 = sqrt(E_1 + C) for SAV, R0 = E + C otherwise.
inline SimState init_state(const RealField& phi0, const Model& m, const SchemeKind& kind) {
  m.check_field(phi0);
  SimState s{phi0, std::nullopt, 0.0, 0.0, 0, std::nullopt};
  const double e = energy_total(phi0, m);
  s.energy = e;
  if (kind.family == Family::Sav) {
    const double e1 = energy_nonlinear(phi0, m) + m.shift();
    detail::require_positive_shifted(e1, "E_1(phi0)");
    s.aux = std::sqrt(e1);
  } else {
    detail::require_positive_shifted(e + m.shift(), "E(phi0)");
    s.aux = e + m.shift();
  }
  return s;
}

/// C = max(1, 1 - E(phi0)), so that E(phi0) + C >= 1.
inline double default_energy_shift(const RealField& phi0, const Model& m) {
  return std::max(1.0, 1.0 - energy_total(phi0, m));
}

/// Baseline first-order SAV, two constant-coefficient solves per step.
inline StepReport step_sav1(const SimState& s, const Model& m, double dt, const Forcing& force = {}) {
  m.check_field(s.phi);
  const double mob = m.mobility();
  const double e1 = energy_nonlinear(s.phi, m) + m.shift();
  detail::require_positive_shifted(e1, "E_1(phi^n)");
  const double root = std::sqrt(e1);
  const RealField fp = nonlinear_force(s.phi, m);
  const double c = mob * dt * m.eps2();

  RealField rhs1 = s.phi;
  if (force) rhs1.axpy(dt, force(s.t + dt));
  const RealField phi1 = solve_shifted(rhs1, c, m.ga());
  RealField rhs2 = m.apply_g(fp);
  rhs2 *= -mob * dt / root;
  const RealField phi2 = solve_shifted(rhs2, c, m.ga());

  const double q = (s.aux + inner_L2(fp, phi1 - s.phi) / (2.0 * root)) /
                   (1.0 - inner_L2(fp, phi2) / (2.0 * root));
  RealField next = phi1;
  next.axpy(q, phi2);

  StepReport r{SimState{std::move(next), std::nullopt, q, s.t + dt, s.step_index + 1, std::nullopt}};
  r.state.energy = energy_total(r.state.phi, m);
  const double e1_new = energy_nonlinear(r.state.phi, m) + m.shift();
  r.xi = e1_new > 0.0 ? q / std::sqrt(e1_new) : std::numeric_limits<double>::quiet_NaN();
  r.dissipation = s.aux - q;
  r.rate_norm_sq = detail::rate_norm_sq(r.state.phi, s.phi, m, dt);
  return r;
}

/// Crank-Nicolson SAV with midpoint q and extrapolation (3 phi^n - phi^{n-1})/2.
/// Without phi^{n-1} the step is a first-order bootstrap.
inline StepReport step_sav_cn(const SimState& s, const Model& m, double dt, const Forcing& force = {}) {
  if (!s.phi_prev) {
    StepReport r = step_sav1(s, m, dt, force);
    r.state.phi_prev = s.phi;
    return r;
  }
  m.check_field(s.phi);
  const double mob = m.mobility();
  const RealField hat = detail::extrapolate(s.phi, *s.phi_prev, 1.5, -0.5);
  const double e1 = energy_nonlinear(hat, m) + m.shift();
  detail::require_positive_shifted(e1, "E_1(phi^{n+1/2})");
  RealField b = nonlinear_force(hat, m);
  b *= 1.0 / std::sqrt(e1);
  const double c = 0.5 * mob * dt * m.eps2();

  RealField rhs1 = s.phi;
  rhs1.axpy(-c, apply_operator(s.phi, m.ga()));
  if (force) rhs1.axpy(dt, force(s.t + 0.5 * dt));
  const RealField phi1 = solve_shifted(rhs1, c, m.ga());
  RealField rhs2 = m.apply_g(b);
  rhs2 *= -mob * dt;
  const RealField phi2 = solve_shifted(rhs2, c, m.ga());

  const double q_half = (s.aux + 0.25 * inner_L2(b, phi1 - s.phi)) / (1.0 - 0.25 * inner_L2(b, phi2));
  const double q = 2.0 * q_half - s.aux;
  RealField next = phi1;
  next.axpy(q_half, phi2);

  StepReport r{SimState{std::move(next), s.phi, q, s.t + dt, s.step_index + 1, std::nullopt}};
  r.state.energy = energy_total(r.state.phi, m);
  const double e1_new = energy_nonlinear(r.state.phi, m) + m.shift();
  r.xi = e1_new > 0.0 ? q / std::sqrt(e1_new) : std::numeric_limits<double>::quiet_NaN();
  r.dissipation = s.aux - q;
  r.rate_norm_sq = detail::rate_norm_sq(r.state.phi, s.phi, m, dt);
  return r;
}

/// Generalized SAV, k = 1 (backward Euler) or k = 2 (BDF2). One solve per step.
inline StepReport step_gsav(const SimState& s, const Model& m, double dt, int order,
                            const Forcing& force = {}) {
  if (order != 1 && order != 2) throw InvalidArgument("gsav order must be 1 or 2");
  if (order == 2 && !s.phi_prev) {
    StepReport r = step_gsav(s, m, dt, 1, force);
    r.state.phi_prev = s.phi;
    return r;
  }
  m.check_field(s.phi);
  const double mob = m.mobility();
  const double alpha = order == 1 ? 1.0 : 1.5;
  const RealField beta = order == 1 ? s.phi : detail::extrapolate(s.phi, *s.phi_prev, 2.0, -0.5);
  const RealField hat = order == 1 ? s.phi : detail::extrapolate(s.phi, *s.phi_prev, 2.0, -1.0);

  const RealField fp = nonlinear_force(hat, m);
  RealField rhs = beta;
  rhs.axpy(-mob * dt, m.apply_g(fp));
  std::optional<RealField> f;
  if (force) {
    f = force(s.t + dt);
    rhs.axpy(dt, *f);
  }
  rhs *= 1.0 / alpha;
  const RealField bar = solve_shifted(rhs, mob * dt * m.eps2() / alpha, m.ga());

  RealField mu = apply_operator(bar, m.a());
  mu *= m.eps2();
  mu += fp;
  const double dissip = inner_L2(m.apply_g(mu), mu);
  const double e_hat = (order == 1 ? detail::energy_of(s, m) : energy_total(hat, m)) + m.shift();
  detail::require_positive_shifted(e_hat, "E(phi_hat)");

  // (R - R^n)/dt = -M xi (G mu, mu) [+ (mu, f)], xi = R / (E(phi_hat) + C)
  double numer = s.aux;
  if (f) numer += dt * inner_L2(mu, *f);
  const double r_new = numer / (1.0 + mob * dt * dissip / e_hat);
  const double xi = r_new / e_hat;
  const double eta = 1.0 - std::pow(1.0 - xi, order + 1);
  RealField next = bar;
  next *= eta;

  StepReport r{SimState{std::move(next), std::nullopt, r_new, s.t + dt, s.step_index + 1, std::nullopt}};
  if (order == 2) r.state.phi_prev = s.phi;
  r.state.energy = energy_total(r.state.phi, m);
  r.xi = xi;
  r.dissipation = s.aux - r_new;
  r.rate_norm_sq = detail::rate_norm_sq(r.state.phi, s.phi, m, dt);
  return r;
}

namespace detail {

/// First-order PS-SAV for either metric; G = I gives the L2 scheme, G = -Laplacian the H^-1 one.
inline StepReport pssav1(const SimState& s, const Model& m, double dt, const Forcing& force,
                         const StepOptions& opt) {
  m.check_field(s.phi);
  const double mob = m.mobility();
  const double e_now = energy_of(s, m);
  const double denom = e_now + m.shift();
  require_positive_shifted(denom, "E(phi^n)");
  const double c_op = mob * m.spec().stabilizer * dt * m.eps2();

  // (E + C)(I + M s dt eps2 G A) phi_1 = -M G mu^n
  RealField rhs = m.apply_g(chemical_potential(s.phi, m));
  rhs *= -mob / denom;
  const RealField phi1 = solve_shifted(rhs, c_op, m.ga());
  const double a = m.metric_inner(phi1, phi1);

  StepReport r{SimState{s.phi, std::nullopt, s.aux, s.t + dt, s.step_index + 1, std::nullopt}};
  unsigned flags = kNoFlags;
  RealField next = s.phi;
  if (!force) {
    if (a <= degenerate_threshold(s.phi, dt)) {
      r.flags = kQuadraticDegenerate;
      r.quad = QuadCoeffs{0.0, mob / dt, -mob / dt * s.aux};
      r.state.energy = e_now;
      r.xi = s.aux / denom;
      return r;
    }
    r.quad = QuadCoeffs{a, mob / dt, -mob / dt * s.aux};
    r.state.aux = opt.root(r.quad);
    next.axpy(dt * r.state.aux, phi1);
  } else {
    const RealField f = force(s.t + dt);
    const RealField phi2 = solve_shifted(f, c_op, m.ga());
    r.quad = QuadCoeffs{a, mob / dt + 2.0 * m.metric_inner(phi1, phi2) - m.metric_inner(f, phi1),
                        m.metric_inner(phi2, phi2) - m.metric_inner(f, phi2) - mob / dt * s.aux};
    r.state.aux = closest_root(r.quad, denom, flags);
    next.axpy(dt * r.state.aux, phi1);
    next.axpy(dt, phi2);
  }
  r.flags = flags;
  r.state.phi = std::move(next);
  r.state.energy = energy_total(r.state.phi, m);
  r.xi = r.state.aux / (*r.state.energy + m.shift());
  r.dissipation = s.aux - r.state.aux;
  r.rate_norm_sq = detail::rate_norm_sq(r.state.phi, s.phi, m, dt);
  return r;
}

/// Crank-Nicolson PS-SAV with adaptive stabilizer s^{n+1}.
inline StepReport pssav_cn(const SimState& s, const Model& m, double dt, const Forcing& force,
                           const StepOptions& opt) {
  if (!s.phi_prev) {
    StepReport r = pssav1(s, m, dt, force, opt);
    r.state.phi_prev = s.phi;
    return r;
  }
  m.check_field(s.phi);
  const double mob = m.mobility();
  const RealField hat = extrapolate(s.phi, *s.phi_prev, 1.5, -0.5);
  const double denom = energy_total(hat, m) + m.shift();
  require_positive_shifted(denom, "E(phi^{n+1/2})");
  const double c_op = 0.5 * mob * dt * m.eps2();

  // 2(E(hat) + C)(I + 1/2 M eps2 dt G A) phi_1 = -M G [eps2 A phi^n + F'(hat)]
  RealField mu = apply_operator(s.phi, m.a());
  mu *= m.eps2();
  mu += nonlinear_force(hat, m);
  RealField rhs = m.apply_g(mu);
  rhs *= -mob / (2.0 * denom);
  const RealField phi1 = solve_shifted(rhs, c_op, m.ga());
  const double a = m.metric_inner(phi1, phi1);
  const double rn = s.aux;

  StepReport r{SimState{s.phi, s.phi, rn, s.t + dt, s.step_index + 1, std::nullopt}};
  if (!force && a <= degenerate_threshold(s.phi, dt)) {
    r.flags = kQuadraticDegenerate;
    r.quad = QuadCoeffs{0.0, mob / dt, -mob / dt * rn};
    r.state.energy = energy_of(s, m);
    r.xi = rn / (*r.state.energy + m.shift());
    return r;
  }
  const double sn = rn * a <= mob / dt ? 0.0 : rn * a / (mob * dt) - 1.0 / (dt * dt);
  r.stabilizer = sn;
  const double kappa = mob / dt + mob * sn * dt;
  RealField next = s.phi;
  unsigned flags = kNoFlags;
  if (!force) {
    double c = rn * rn * a - kappa * rn;
    // c vanishes analytically when the stabilizer is active.
    if (sn > 0.0) c = std::min(c, 0.0);
    r.quad = QuadCoeffs{a, kappa + 2.0 * rn * a, c};
    r.state.aux = opt.root(r.quad);
    next.axpy(dt * (r.state.aux + rn), phi1);
  } else {
    const RealField f = force(s.t + 0.5 * dt);
    const RealField phi2 = solve_shifted(f, c_op, m.ga());
    // With u = R + R^n: a u^2 + B u + C0 = 0, rewritten in R.
    const double bu = kappa + 2.0 * m.metric_inner(phi1, phi2) - m.metric_inner(f, phi1);
    const double cu = m.metric_inner(phi2, phi2) - m.metric_inner(f, phi2) - 2.0 * kappa * rn;
    r.quad = QuadCoeffs{a, 2.0 * a * rn + bu, a * rn * rn + bu * rn + cu};
    r.state.aux = closest_root(r.quad, energy_of(s, m) + m.shift(), flags);
    next.axpy(dt * (r.state.aux + rn), phi1);
    next.axpy(dt, phi2);
  }
  r.flags = flags;
  r.state.phi = std::move(next);
  r.state.energy = energy_total(r.state.phi, m);
  r.xi = r.state.aux / (*r.state.energy + m.shift());
  r.dissipation = rn - r.state.aux;
  r.rate_norm_sq = detail::rate_norm_sq(r.state.phi, s.phi, m, dt);
  return r;
}

inline void require_flow(const Model& m, FlowKind flow) {
  if (m.spec().flow != flow) throw InvalidArgument("stepper does not match the model's flow metric");
}

}  // namespace detail

inline StepReport step_pssav1_L2(const SimState& s, const Model& m, double dt, const Forcing& force = {},
                                 const StepOptions& opt = {}) {
  detail::require_flow(m, FlowKind::L2);
  return detail::pssav1(s, m, dt, force, opt);
}

inline StepReport step_pssav_cn_L2(const SimState& s, const Model& m, double dt, const Forcing& force = {},
                                   const StepOptions& opt = {}) {
  detail::require_flow(m, FlowKind::L2);
  return detail::pssav_cn(s, m, dt, force, opt);
}

inline StepReport step_pssav1_Hm1(const SimState& s, const Model& m, double dt, const Forcing& force = {},
                                  const StepOptions& opt = {}) {
  detail::require_flow(m, FlowKind::Hm1);
  return detail::pssav1(s, m, dt, force, opt);
}

inline StepReport step_pssav_cn_Hm1(const SimState& s, const Model& m, double dt, const Forcing& force = {},
                                    const StepOptions& opt = {}) {
  detail::require_flow(m, FlowKind::Hm1);
  return detail::pssav_cn(s, m, dt, force, opt);
}

/// Energy calibration R^{n+1} <- min(R^n, E(phi^{n+1}) + C).
inline SimState relax_R(SimState after, double previous_aux, const Model& m) {
  const double e = detail::energy_of(after, m);
  after.energy = e;
  after.aux = std::min(previous_aux, e + m.shift());
  return after;
}

/// One step of the scheme family selected by kind, including relaxation and the blowup check.
inline StepReport step(const SimState& s, const Model& m, const SchemeKind& kind, double dt,
                       const Forcing& force = {}, const StepOptions& opt = {}) {
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  StepReport r = [&] {
    switch (kind.family) {
      case Family::Sav:
        return kind.order == Order::First ? step_sav1(s, m, dt, force) : step_sav_cn(s, m, dt, force);
      case Family::Gsav:
        return step_gsav(s, m, dt, kind.order == Order::First ? 1 : 2, force);
      case Family::Pssav:
        return kind.order == Order::First ? detail::pssav1(s, m, dt, force, opt)
                                          : detail::pssav_cn(s, m, dt, force, opt);
    }
    throw InvalidArgument("unknown scheme family");
  }();
  if (kind.relaxed) {
    r.state = relax_R(std::move(r.state), s.aux, m);
    r.dissipation = s.aux - r.state.aux;
    r.xi = r.state.aux / (*r.state.energy + m.shift());
  }
  if (!r.state.phi.all_finite() || !std::isfinite(r.state.aux)) {
    throw NumericalBlowup("non-finite state", r.state.step_index);
  }
  if (r.state.phi.max_abs() > 1e8) throw NumericalBlowup("|phi|_inf exceeded 1e8", r.state.step_index);
  return r;
}

}  // namespace gradflow
