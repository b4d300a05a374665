#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gradflow/fd.hpp"
#include "gradflow/harness.hpp"
#include "gradflow/models.hpp"
#include "gradflow/oracle.hpp"
#include "gradflow/schemes.hpp"
#include "gradflow/spectral.hpp"

// Invariant suite: positivity and dissipation of the PS-SAV variants,
// quadratic plug-back, discrete identities, oracle equivalence, mass
// conservation and relaxation. Each check returns a named pass/fail result.

namespace gradflow::verify {

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyOptions {
  /// Root solver handed to the PS-SAV steppers; replaced in mutation tests.
  RootSolver root = &solve_R_quadratic;
  int states = 200;
  std::vector<double> dts{1e-3, 1.0, 100.0};
  int steps_per_state = 3;
  std::size_t n = 16;
  int oracle_states = 50;
  long mass_steps = 10000;
  int sbp_pairs = 100;
  std::uint64_t seed = 20240607;
};

/// Deliberately wrong root (the sign of c flipped), for mutation tests of the suite.
inline double sign_error_root(const QuadCoeffs& q) { return solve_R_quadratic({q.a, q.b, -q.c}); }

/// Random trigonometric polynomial with modes |m| <= 3 plus an optional mean.
inline RealField random_smooth(const Grid& g, std::mt19937_64& rng, double amplitude, double mean = 0.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double a[4][4], b[4][4];
  for (int p = 0; p < 4; ++p) {
    for (int q = 0; q < 4; ++q) {
      a[p][q] = (p + q == 0) ? 0.0 : u(rng) / (1.0 + p * p + q * q);
      b[p][q] = u(rng);
    }
  }
  const double k = 2.0 * M_PI / g.length();
  return RealField::sample(g, [&](double x, double y) {
    double v = mean;
    for (int p = 0; p < 4; ++p) {
      for (int q = 0; q < 4; ++q) v += amplitude * a[p][q] * std::cos(k * (p * x + q * y) + M_PI * b[p][q]);
    }
    return v;
  });
}

namespace detail {

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct Variant {
  const char* name;
  ModelSpec spec;
  Order order;
};

inline std::vector<Variant> pssav_variants() {
  ModelSpec ac;
  ac.eps2 = 1e-2;
  ModelSpec ch;
  ch.flow = FlowKind::Hm1;
  ch.eps2 = 4e-2;
  ch.mobility = 0.5;
  return {{"pssav1-L2", ac, Order::First},
          {"pssav-cn-L2", ac, Order::Second},
          {"pssav1-Hm1", ch, Order::First},
          {"pssav-cn-Hm1", ch, Order::Second}};
}

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

}  // namespace detail

/// Relative gap of an energy identity lhs = rhs. Gaps below the rounding of
/// R^n itself (1e-14 R^n) count as zero: R^n - R^{n+1} cannot be resolved finer.
inline double identity_error(double lhs, double rhs, double rn) {
  const double gap = std::abs(lhs - rhs);
  if (gap <= 1e-14 * std::abs(rn)) return 0.0;
  return gap / std::max({std::abs(lhs), std::abs(rhs), 1e-300});
}

/// Runs every PS-SAV variant from random smooth states and reports positivity,
/// dissipation (R non-increasing plus the per-step energy identity) and the
/// quadratic plug-back residual as three results.
inline std::vector<PropertyResult> check_pssav_laws(const VerifyOptions& opt) {
  detail::Timer timer;
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> amp(0.1, 1.5);
  const Grid g(opt.n, 2.0 * M_PI);
  const StepOptions so{opt.root};

  bool pos_ok = true, dis_ok = true, quad_ok = true;
  double worst_identity = 0.0, worst_resid = 0.0, min_r = 1e300;
  std::string pos_msg, dis_msg, quad_msg;
  long steps = 0;

  for (const auto& v : detail::pssav_variants()) {
    const SchemeKind kind{Family::Pssav, v.order, false};
    for (int sidx = 0; sidx < opt.states; ++sidx) {
      const double mean = v.spec.flow == FlowKind::Hm1 ? 0.3 * std::uniform_real_distribution<double>(-1, 1)(rng) : 0.0;
      const RealField phi0 = random_smooth(g, rng, amp(rng), mean);
      const Model m = Model(v.spec, g).with_shift(default_energy_shift(phi0, Model(v.spec, g)));
      for (double dt : opt.dts) {
        SimState s = init_state(phi0, m, kind);
        for (int k = 0; k < opt.steps_per_state; ++k) {
          std::optional<StepReport> attempt;
          try {
            attempt = step(s, m, kind, dt, {}, so);
          } catch (const Error& e) {
            // A quadratic without a non-negative root is a positivity failure.
            if (pos_ok) pos_msg = std::string(v.name) + " dt=" + detail::sci(dt) + " threw: " + e.what();
            pos_ok = false;
            break;
          }
          const StepReport& r = *attempt;
          ++steps;
          const double rn = s.aux;
          const double r1 = r.state.aux;
          min_r = std::min(min_r, r1);
          const bool cn_step = v.order == Order::Second && s.phi_prev.has_value();
          // Strict positivity for first order; CN may reach R = 0.
          const bool positive = cn_step ? r1 >= 0.0 : r1 > 0.0;
          if (!positive && pos_ok) {
            pos_ok = false;
            pos_msg = std::string(v.name) + " dt=" + detail::sci(dt) + " gave R=" + detail::sci(r1);
          }
          const double lhs = (cn_step ? 1.0 + r.stabilizer * dt * dt : 1.0) * (rn - r1);
          const double rhs = dt / m.mobility() * r.rate_norm_sq;
          const double err = identity_error(lhs, rhs, rn);
          worst_identity = std::max(worst_identity, err);
          if ((r1 > rn + 1e-14 * std::abs(rn) || err > 1e-10) && dis_ok) {
            dis_ok = false;
            dis_msg = std::string(v.name) + " dt=" + detail::sci(dt) + " R^n=" + detail::sci(rn) +
                      " R^{n+1}=" + detail::sci(r1) + " identity error " + detail::sci(err);
          }
          if (!(r.flags & kQuadraticDegenerate)) {
            const QuadCoeffs& q = r.quad;
            const double scale = std::max({std::abs(q.a) * r1 * r1, std::abs(q.b * r1), std::abs(q.c)});
            const double resid = scale > 0.0 ? std::abs(q.residual(r1)) / scale : 0.0;
            worst_resid = std::max(worst_resid, resid);
            if (resid > 1e-9 && quad_ok) {
              quad_ok = false;
              quad_msg = std::string(v.name) + " residual " + detail::sci(resid);
            }
          }
          s = r.state;
        }
      }
    }
  }
  const double secs = timer.seconds();
  const std::string base = std::to_string(steps) + " steps";
  return {
      {"positivity", pos_ok, pos_ok ? base + ", min R " + detail::sci(min_r) : pos_msg, secs},
      {"dissipation", dis_ok, dis_ok ? base + ", worst identity error " + detail::sci(worst_identity) : dis_msg, secs},
      {"quadratic-plug-back", quad_ok, quad_ok ? "worst residual " + detail::sci(worst_resid) : quad_msg, secs},
  };
}

/// (u, Lap_h v)_m = -[(D_x u, D_x v)_x + (D_y u, D_y v)_y] = (Lap_h u, v)_m.
inline PropertyResult check_summation_by_parts(const VerifyOptions& opt) {
  detail::Timer timer;
  std::mt19937_64 rng(opt.seed + 1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (std::size_t n : {8u, 16u, 64u}) {
    const Grid g(n, 2.0);
    for (int k = 0; k < opt.sbp_pairs; ++k) {
      RealField a(g), b(g);
      for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = u(rng);
        b[i] = u(rng);
      }
      const double lhs = fd::inner_m(a, fd::laplacian_fd(b));
      const auto [ax, ay] = fd::gradient_fd(a);
      const auto [bx, by] = fd::gradient_fd(b);
      const double mid = -(fd::inner_x(ax, bx) + fd::inner_y(ay, by));
      const double rhs = fd::inner_m(fd::laplacian_fd(a), b);
      const double scale = std::max({std::abs(lhs), std::abs(mid), std::abs(rhs)});
      worst = std::max({worst, std::abs(lhs - mid) / scale, std::abs(rhs - mid) / scale});
    }
  }
  return {"summation-by-parts", worst <= 1e-12, "worst relative gap " + detail::sci(worst), timer.seconds()};
}

/// Symmetry of the H^-1 product and its value 2/pi^2 for sin(pi x) on (0, 2)^2.
inline PropertyResult check_hm1_product(const VerifyOptions& opt) {
  detail::Timer timer;
  std::mt19937_64 rng(opt.seed + 2);
  const Grid g(32, 2.0);
  double worst = 0.0;
  for (int k = 0; k < opt.sbp_pairs; ++k) {
    const RealField f = random_smooth(g, rng, 1.0);
    const RealField h = random_smooth(g, rng, 1.0);
    const double a = inner_Hm1(f, h);
    const double b = inner_Hm1(h, f);
    worst = std::max(worst, std::abs(a - b) / std::max(std::abs(a), 1e-300));
  }
  const RealField s = RealField::sample(g, [](double x, double) { return std::sin(M_PI * x); });
  const double mode_err = std::abs(inner_Hm1(s, s) - 2.0 / (M_PI * M_PI)) / (2.0 / (M_PI * M_PI));
  const bool ok = worst <= 1e-12 && mode_err <= 1e-12;
  return {"hm1-product", ok, "symmetry " + detail::sci(worst) + ", single mode " + detail::sci(mode_err),
          timer.seconds()};
}

/// Every production stepper against the dense oracle on 8 x 8 grids.
inline PropertyResult check_oracle_equivalence(const VerifyOptions& opt) {
  detail::Timer timer;
  std::mt19937_64 rng(opt.seed + 3);
  std::uniform_real_distribution<double> amp(0.2, 1.2);
  const Grid g(8, 2.0);

  struct Case {
    const char* name;
    ModelSpec spec;
    Family family;
  };
  ModelSpec ac;
  ac.eps2 = 1e-2;
  ModelSpec ch;
  ch.flow = FlowKind::Hm1;
  ch.eps2 = 4e-2;
  ch.mobility = 0.5;
  ModelSpec mbe;
  mbe.a_kind = OperatorKind::Bilaplacian;
  mbe.eps2 = 1e-2;
  mbe.potential = Potential::mbe_slope();
  ModelSpec mbe0 = mbe;
  mbe0.potential = Potential::mbe_no_slope();
  const std::vector<Case> cases = {
      {"ac", ac, Family::Sav},   {"ac", ac, Family::Gsav},   {"ac", ac, Family::Pssav},    {"ch", ch, Family::Sav},
      {"ch", ch, Family::Gsav},  {"ch", ch, Family::Pssav},  {"mbe", mbe, Family::Pssav}, {"mbe0", mbe0, Family::Pssav},
  };

  double worst = 0.0;
  std::string where;
  auto track = [&](double err, const std::string& name) {
    if (err > worst) {
      worst = err;
      where = name;
    }
  };
  for (const auto& c : cases) {
    for (Order order : {Order::First, Order::Second}) {
      for (bool relaxed : {false, true}) {
        if (relaxed && c.family != Family::Pssav) continue;
        const SchemeKind kind{c.family, order, relaxed};
        for (int k = 0; k < opt.oracle_states; ++k) {
          const RealField phi0 = random_smooth(g, rng, amp(rng), c.spec.flow == FlowKind::Hm1 ? 0.2 : 0.0);
          ModelSpec spec = c.spec;
          spec.energy_shift = default_energy_shift(phi0, Model(spec, g)) + 1.0;
          const Model m(spec, g);
          SimState s = init_state(phi0, m, kind);
          // Two steps so second-order schemes are checked past their bootstrap.
          for (int st = 0; st < 2; ++st) {
            const double dt = 0.05;
            const SimState ref = oracle::reference_step(s, m, dt, kind);
            const StepReport r = step(s, m, kind, dt);
            track((r.state.phi - ref.phi).max_abs(), c.name + std::string(" ") + to_string(kind));
            track(std::abs(r.state.aux - ref.aux) / std::max(1.0, std::abs(ref.aux)),
                  c.name + std::string(" ") + to_string(kind) + " aux");
            s = r.state;
          }
        }
      }
    }
  }
  // Fully discrete finite-difference scheme against the stencil oracle.
  ModelSpec fd_spec = ac;
  fd_spec.energy_shift = 5.0;
  const Model fdm(fd_spec, g);
  for (int k = 0; k < opt.oracle_states; ++k) {
    const SimState s = fd::init_state_fd(random_smooth(g, rng, amp(rng)), fdm);
    const StepReport r = fd::step_pssav1_fd(s, fdm, 0.05);
    const SimState ref = oracle::reference_step(s, fdm, 0.05, SchemeKind{}, {}, oracle::Assembly::FdStencil);
    track((r.state.phi - ref.phi).max_abs(), "fd pssav1");
  }
  return {"oracle-equivalence", worst <= 1e-10, "worst max-norm gap " + detail::sci(worst) + " (" + where + ")",
          timer.seconds()};
}

/// Relative mass drift of every mass-conserving H^-1 scheme over mass_steps steps.
inline PropertyResult check_mass_conservation(const VerifyOptions& opt) {
  detail::Timer timer;
  std::mt19937_64 rng(opt.seed + 4);
  const Grid g(opt.n, 2.0 * M_PI);
  ModelSpec ch;
  ch.flow = FlowKind::Hm1;
  ch.eps2 = 4e-2;
  ch.mobility = 0.5;
  double worst = 0.0;
  std::string where;
  const StepOptions so{opt.root};
  for (Family fam : {Family::Sav, Family::Pssav}) {
    for (Order order : {Order::First, Order::Second}) {
      const SchemeKind kind{fam, order, false};
      const RealField phi0 = random_smooth(g, rng, 0.8, 0.25);
      const Model m = Model(ch, g).with_shift(default_energy_shift(phi0, Model(ch, g)));
      SimState s = init_state(phi0, m, kind);
      const double m0 = mass(phi0);
      for (long k = 0; k < opt.mass_steps; ++k) s = step(s, m, kind, 1e-2, {}, so).state;
      const double drift = std::abs(mass(s.phi) - m0) / (1.0 + std::abs(m0));
      if (drift >= worst) {
        worst = drift;
        where = to_string(kind);
      }
    }
  }
  return {"mass-conservation", worst <= 1e-10,
          std::to_string(opt.mass_steps) + " steps, worst drift " + detail::sci(worst) + " (" + where + ")",
          timer.seconds()};
}

/// R-PS-SAV trajectories: R non-increasing and R - C <= E(phi) at every step.
inline PropertyResult check_relaxation(const VerifyOptions& opt) {
  detail::Timer timer;
  std::mt19937_64 rng(opt.seed + 5);
  const Grid g(opt.n, 2.0 * M_PI);
  bool ok = true;
  std::string msg;
  long steps = 0;
  const StepOptions so{opt.root};
  for (const auto& v : detail::pssav_variants()) {
    const SchemeKind kind{Family::Pssav, v.order, true};
    for (int sidx = 0; sidx < std::max(1, opt.states / 10); ++sidx) {
      const RealField phi0 = random_smooth(g, rng, 1.0, v.spec.flow == FlowKind::Hm1 ? 0.1 : 0.0);
      const Model m = Model(v.spec, g).with_shift(default_energy_shift(phi0, Model(v.spec, g)));
      for (double dt : opt.dts) {
        SimState s = init_state(phi0, m, kind);
        for (int k = 0; k < 10; ++k) {
          const StepReport r = step(s, m, kind, dt, {}, so);
          ++steps;
          const double e = *r.state.energy;
          if (ok && (r.state.aux > s.aux || r.state.aux - m.shift() > e + 1e-12 * std::max(1.0, std::abs(e)))) {
            ok = false;
            msg = std::string(v.name) + " dt=" + detail::sci(dt) + " R=" + detail::sci(r.state.aux) +
                  " R^n=" + detail::sci(s.aux) + " E+C=" + detail::sci(e + m.shift());
          }
          s = r.state;
        }
      }
    }
  }
  return {"relaxation", ok, ok ? std::to_string(steps) + " relaxed steps" : msg, timer.seconds()};
}

/// Fully discrete FD scheme: R_h > 0, non-increasing, and the energy identity.
inline PropertyResult check_fd_energy_law(const VerifyOptions& opt) {
  detail::Timer timer;
  std::mt19937_64 rng(opt.seed + 6);
  const Grid g(opt.n, 2.0 * M_PI);
  ModelSpec ac;
  ac.eps2 = 1e-2;
  double worst = 0.0;
  bool ok = true;
  const StepOptions so{opt.root};
  for (int sidx = 0; sidx < std::max(1, opt.states / 10); ++sidx) {
    const RealField phi0 = random_smooth(g, rng, 1.0);
    const Model m = Model(ac, g).with_shift(1.0 + std::abs(fd::energy_fd(phi0, Model(ac, g).with_shift(0.0))));
    for (double dt : opt.dts) {
      SimState s = fd::init_state_fd(phi0, m);
      for (int k = 0; k < opt.steps_per_state; ++k) {
        const StepReport r = fd::step_pssav1_fd(s, m, dt, so);
        const double lhs = s.aux - r.state.aux;
        const double rhs = dt / m.mobility() * r.rate_norm_sq;
        const double err = identity_error(lhs, rhs, s.aux);
        worst = std::max(worst, err);
        if (!(r.state.aux > 0.0) || r.state.aux > s.aux + 1e-14 * s.aux || err > 1e-10) ok = false;
        s = r.state;
      }
    }
  }
  return {"fd-energy-law", ok, "worst identity error " + detail::sci(worst), timer.seconds()};
}

/// A check that throws is reported as a failure of that property.
inline PropertyResult guarded(const char* name, PropertyResult (*check)(const VerifyOptions&),
                              const VerifyOptions& opt) {
  detail::Timer timer;
  try {
    return check(opt);
  } catch (const std::exception& e) {
    return {name, false, std::string("threw: ") + e.what(), timer.seconds()};
  }
}

inline std::vector<PropertyResult> run_suite(const VerifyOptions& opt = {}) {
  std::vector<PropertyResult> out = check_pssav_laws(opt);
  out.push_back(guarded("summation-by-parts", &check_summation_by_parts, opt));
  out.push_back(guarded("hm1-product", &check_hm1_product, opt));
  out.push_back(guarded("oracle-equivalence", &check_oracle_equivalence, opt));
  out.push_back(guarded("mass-conservation", &check_mass_conservation, opt));
  out.push_back(guarded("relaxation", &check_relaxation, opt));
  out.push_back(guarded("fd-energy-law", &check_fd_energy_law, opt));
  return out;
}

}  // namespace gradflow::verify
