#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "gradflow/diagnostics.hpp"
#include "gradflow/errors.hpp"
#include "gradflow/grid.hpp"
#include "gradflow/io.hpp"
#include "gradflow/models.hpp"
#include "gradflow/schemes.hpp"
#include "gradflow/spectral.hpp"

namespace gradflow {

enum class InitialKind { Manufactured, Star, Circles19, RandomUniform, Constant };

struct InitialCondition {
  InitialKind kind = InitialKind::Constant;
  ManufacturedCase mcase = ManufacturedCase::AcCaseA;
  /// RandomUniform range.
  double lo = -1e-3;
  double hi = 1e-3;
  /// Constant value.
  double value = 0.0;
  /// Star: alpha inside sqrt(2 alpha). Circles19: epsilon.
  double width = 1e-4;

  static InitialCondition manufactured(ManufacturedCase c) {
    InitialCondition ic;
    ic.kind = InitialKind::Manufactured;
    ic.mcase = c;
    return ic;
  }
  static InitialCondition star(double alpha) {
    InitialCondition ic;
    ic.kind = InitialKind::Star;
    ic.width = alpha;
    return ic;
  }
  static InitialCondition circles(double eps) {
    InitialCondition ic;
    ic.kind = InitialKind::Circles19;
    ic.width = eps;
    return ic;
  }
  static InitialCondition random_uniform(double lo, double hi) {
    InitialCondition ic;
    ic.kind = InitialKind::RandomUniform;
    ic.lo = lo;
    ic.hi = hi;
    return ic;
  }
  static InitialCondition constant(double v) {
    InitialCondition ic;
    ic.value = v;
    return ic;
  }
};

/// How a two-level scheme takes its first step. Auto starts manufactured runs
/// from the exact solution at t = dt and everything else from the first-order sibling.
enum class Bootstrap { Auto, FirstOrder, Exact };

struct RunConfig {
  ModelSpec model;
  SchemeKind scheme;
  Grid grid{128, 2.0};
  double dt = 1e-2;
  double t_final = 1.0;
  std::vector<double> snapshot_times;
  std::uint64_t seed = 0;
  InitialCondition initial;
  /// Emit a record every k steps (the first and last step are always recorded); 0 records only those two.
  long record_every = 1;
  Bootstrap bootstrap = Bootstrap::Auto;

  long steps() const { return std::llround(t_final / dt); }

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
    if (!(t_final >= dt)) throw ConfigError("T must be at least dt");
    for (double t : snapshot_times) {
      if (t < 0.0 || t > t_final) throw ConfigError("snapshot times must lie in [0, T]");
    }
    if (record_every < 0) throw ConfigError("record_every must be non-negative");
    if (initial.kind == InitialKind::RandomUniform && !(initial.lo <= initial.hi)) {
      throw ConfigError("random initial range needs lo <= hi");
    }
    if ((initial.kind == InitialKind::Star || initial.kind == InitialKind::Circles19) && !(initial.width > 0.0)) {
      throw ConfigError("initial width parameter must be positive");
    }
    if (bootstrap == Bootstrap::Exact && initial.kind != InitialKind::Manufactured) {
      throw ConfigError("exact bootstrap needs a manufactured initial condition");
    }
    model.validate();
    scheme.validate(model);
  }
};

inline RealField initial_field(const RunConfig& cfg) {
  const Grid& g = cfg.grid;
  const InitialCondition& ic = cfg.initial;
  switch (ic.kind) {
    case InitialKind::Manufactured:
      return exact_solution(ic.mcase, g, 0.0);
    case InitialKind::Star: {
      const double c = 0.5 * g.length();
      const double w = std::sqrt(2.0 * ic.width);
      return RealField::sample(g, [&](double x, double y) {
        const double theta = std::atan2(y - c, x - c);
        const double r = std::hypot(x - c, y - c);
        return std::tanh((1.5 + 1.2 * std::cos(6.0 * theta) - 2.0 * M_PI * r) / w);
      });
    }
    case InitialKind::Circles19: {
      const double w = std::sqrt(2.0) * ic.width;
      return RealField::sample(g, [&](double x, double y) {
        double acc = 360.0;
        for (int mi = 1; mi <= 19; ++mi) {
          for (int ni = 1; ni <= 19; ++ni) {
            acc -= std::tanh((std::hypot(x - 0.2 * mi, y - 0.2 * ni) - 0.085) / w);
          }
        }
        return acc;
      });
    }
    case InitialKind::RandomUniform: {
      std::mt19937_64 rng(cfg.seed);
      std::uniform_real_distribution<double> dist(ic.lo, ic.hi);
      RealField f(g);
      for (std::size_t k = 0; k < f.size(); ++k) f[k] = dist(rng);
      return f;
    }
    case InitialKind::Constant:
      return RealField(g, ic.value);
  }
  throw ConfigError("unknown initial condition");
}

/// Model with the energy shift resolved against phi0.
inline Model resolve_model(const RunConfig& cfg, const RealField& phi0) {
  Model m(cfg.model, cfg.grid);
  if (!cfg.model.energy_shift) m = m.with_shift(default_energy_shift(phi0, m));
  return m;
}

inline Forcing manufactured_forcing(const RunConfig& cfg, const Model& m) {
  if (cfg.initial.kind != InitialKind::Manufactured) return {};
  const ManufacturedCase c = cfg.initial.mcase;
  return [c, m](double t) { return forcing(c, m, t); };
}

inline double mass(const RealField& phi) {
  const double h = phi.grid().spacing();
  return phi.sum() * h * h;
}

inline DiagnosticsRecord make_record(const SimState& s, const Model& m, const SchemeKind& kind, double dissipation,
                                     unsigned flags, std::optional<double> xi = std::nullopt) {
  DiagnosticsRecord r;
  r.step = s.step_index;
  r.t = s.t;
  r.e_original = s.energy ? *s.energy : energy_total(s.phi, m);
  r.aux = s.aux;
  if (kind.family == Family::Sav) {
    r.e_modified = energy_quadratic(s.phi, m) + s.aux * s.aux - m.shift();
    r.xi = xi ? *xi : s.aux / std::sqrt(energy_nonlinear(s.phi, m) + m.shift());
  } else {
    r.e_modified = s.aux - m.shift();
    r.xi = xi ? *xi : s.aux / (r.e_original + m.shift());
  }
  r.xi_error = std::abs(r.xi - 1.0);
  r.mass = mass(s.phi);
  r.dissipation = dissipation;
  r.flags = flags;
  return r;
}

struct SnapshotRecord {
  long step = 0;
  double t = 0.0;
  RealField phi;
};

struct RunResult {
  SimState state;
  std::vector<DiagnosticsRecord> records;
  std::vector<SnapshotRecord> snapshots;
  /// The energy shift C used by the run.
  double energy_shift = 0.0;
};

/// Time loop from t = 0 to T. NumericalBlowup propagates with the failing step.
inline RunResult run(const RunConfig& cfg) {
  cfg.validate();
  const RealField phi0 = initial_field(cfg);
  const Model m = resolve_model(cfg, phi0);
  const Forcing force = manufactured_forcing(cfg, m);
  const long nsteps = cfg.steps();

  std::vector<long> snap_steps;
  for (double t : cfg.snapshot_times) snap_steps.push_back(std::llround(t / cfg.dt));

  RunResult out{init_state(phi0, m, cfg.scheme), {}, {}, m.shift()};
  auto want_record = [&](long step) {
    if (step == 0 || step == nsteps) return true;
    return cfg.record_every > 0 && step % cfg.record_every == 0;
  };
  auto take_snapshots = [&](const SimState& s) {
    for (long k : snap_steps) {
      if (k == s.step_index) out.snapshots.push_back({s.step_index, s.t, s.phi});
    }
  };
  out.records.push_back(make_record(out.state, m, cfg.scheme, 0.0, kNoFlags));
  take_snapshots(out.state);

  const bool exact_start = cfg.scheme.order == Order::Second &&
                           (cfg.bootstrap == Bootstrap::Exact ||
                            (cfg.bootstrap == Bootstrap::Auto && cfg.initial.kind == InitialKind::Manufactured));
  if (exact_start && nsteps >= 1) {
    const double prev_aux = out.state.aux;
    SimState s = init_state(exact_solution(cfg.initial.mcase, cfg.grid, cfg.dt), m, cfg.scheme);
    s.phi_prev = out.state.phi;
    s.t = cfg.dt;
    s.step_index = 1;
    out.state = std::move(s);
    if (want_record(1)) out.records.push_back(make_record(out.state, m, cfg.scheme, prev_aux - out.state.aux, 0));
    take_snapshots(out.state);
  }

  while (out.state.step_index < nsteps) {
    StepReport r = step(out.state, m, cfg.scheme, cfg.dt, force);
    r.state.t = static_cast<double>(r.state.step_index) * cfg.dt;
    out.state = std::move(r.state);
    if (want_record(out.state.step_index)) {
      out.records.push_back(make_record(out.state, m, cfg.scheme, r.dissipation, r.flags, r.xi));
    }
    take_snapshots(out.state);
  }
  return out;
}

/// sqrt((e, e)) with e = phi - phi_e(t).
inline double error_L2(const RealField& phi, ManufacturedCase c, double t) {
  const RealField e = phi - exact_solution(c, phi.grid(), t);
  return std::sqrt(inner_L2(e, e));
}

inline double error_L2(const RealField& phi, const RealField& reference) {
  const RealField e = phi - reference;
  return std::sqrt(inner_L2(e, e));
}

/// GRADFLOW_THREADS if set to a positive integer, else the hardware concurrency.
inline unsigned worker_count() {
  if (const char* env = std::getenv("GRADFLOW_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(0..count-1) on up to worker_count() threads; rethrows the first failure.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(worker_count(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

/// Errors at T against the manufactured solution for each dt, with rates log2(e_{i-1}/e_i).
inline ConvergenceTable convergence_study(const RunConfig& cfg, const std::vector<double>& dts) {
  if (cfg.initial.kind != InitialKind::Manufactured) {
    throw ConfigError("convergence studies need a manufactured initial condition");
  }
  ConvergenceTable table(dts.size());
  parallel_for(dts.size(), [&](std::size_t i) {
    RunConfig c = cfg;
    c.dt = dts[i];
    c.record_every = 0;
    c.snapshot_times.clear();
    const RunResult r = run(c);
    table[i] = {dts[i], error_L2(r.state.phi, cfg.initial.mcase, r.state.t), std::nan("")};
  });
  for (std::size_t i = 1; i < table.size(); ++i) {
    table[i].rate = std::log(table[i - 1].error / table[i].error) / std::log(table[i - 1].dt / table[i].dt);
  }
  return table;
}

/// First-order semi-implicit step (I + M dt eps2 G A) phi^{n+1} = phi^n - M dt G F'(phi^n).
inline RealField semi_implicit_step(const RealField& phi, const Model& m, double dt) {
  RealField rhs = phi;
  rhs.axpy(-m.mobility() * dt, m.apply_g(nonlinear_force(phi, m)));
  return solve_shifted(rhs, m.mobility() * dt * m.eps2(), m.ga());
}

inline RealField semi_implicit_run(const RunConfig& cfg, double dt) {
  RealField phi = initial_field(cfg);
  const Model m(cfg.model, cfg.grid);
  const long nsteps = std::llround(cfg.t_final / dt);
  for (long k = 0; k < nsteps; ++k) {
    phi = semi_implicit_step(phi, m, dt);
    if ((k & 1023) == 0 && !phi.all_finite()) throw NumericalBlowup("semi-implicit reference diverged", k + 1);
  }
  if (!phi.all_finite()) throw NumericalBlowup("semi-implicit reference diverged", nsteps);
  return phi;
}

namespace detail {

/// 64-bit FNV-1a, stable across platforms and runs.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string reference_key(const RunConfig& cfg, double dt) {
  const ModelSpec& m = cfg.model;
  const InitialCondition& ic = cfg.initial;
  std::string k = "semi-implicit-v1";
  for (double v : {m.eps2, m.mobility, m.potential.scale, cfg.grid.length(), cfg.t_final, dt, ic.lo, ic.hi, ic.value,
                   ic.width}) {
    k += "|" + io::fmt(v);
  }
  k += "|" + std::to_string(static_cast<int>(m.flow)) + std::to_string(static_cast<int>(m.a_kind)) +
       std::to_string(static_cast<int>(m.potential.type)) + std::to_string(m.dealias) +
       std::to_string(static_cast<int>(ic.kind)) + std::to_string(static_cast<int>(ic.mcase));
  k += "|" + std::to_string(cfg.grid.n()) + "|" + std::to_string(cfg.seed);
  return k;
}

}  // namespace detail

/// Semi-implicit reference at T with step dt, computed once and cached in cache_dir.
inline RealField cached_reference(const RunConfig& cfg, double dt, const std::filesystem::path& cache_dir) {
  char name[64];
  std::snprintf(name, sizeof name, "ref-%016llx.csv",
                static_cast<unsigned long long>(detail::fnv1a(detail::reference_key(cfg, dt))));
  const auto path = cache_dir / name;
  if (std::filesystem::exists(path)) {
    io::Snapshot s = io::read_snapshot(path);
    if (s.phi.grid() == cfg.grid) return std::move(s.phi);
  }
  RealField ref = semi_implicit_run(cfg, dt);
  const auto tmp = cache_dir / (std::string(name) + ".tmp");
  io::write_snapshot(ref, cfg.t_final, tmp);
  std::filesystem::rename(tmp, path);
  return ref;
}

/// Errors at T of each approach against a reference field, for every dt.
inline ComparisonTable compare_approaches(const RunConfig& cfg, const std::vector<SchemeKind>& approaches,
                                          const std::vector<double>& dts, const RealField& reference) {
  ComparisonTable table{dts, {}, std::vector<std::vector<double>>(dts.size(), std::vector<double>(approaches.size()))};
  for (const auto& k : approaches) table.names.push_back(to_string(k));
  parallel_for(dts.size() * approaches.size(), [&](std::size_t job) {
    const std::size_t i = job / approaches.size();
    const std::size_t j = job % approaches.size();
    RunConfig c = cfg;
    c.scheme = approaches[j];
    c.dt = dts[i];
    c.record_every = 0;
    c.snapshot_times.clear();
    table.errors[i][j] = error_L2(run(c).state.phi, reference);
  });
  return table;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares y = slope x + intercept.
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("line fit needs two or more matching points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

/// Fit of log10 E against log10 t over records with t in [t0, t1].
inline LineFit loglog_energy_fit(const std::vector<DiagnosticsRecord>& recs, double t0, double t1) {
  std::vector<double> x, y;
  for (const auto& r : recs) {
    if (r.t >= t0 && r.t <= t1 && r.e_original > 0.0) {
      x.push_back(std::log10(r.t));
      y.push_back(std::log10(r.e_original));
    }
  }
  return fit_line(x, y);
}

/// Fit of E against log10 t over records with t in [t0, t1].
inline LineFit semilog_energy_fit(const std::vector<DiagnosticsRecord>& recs, double t0, double t1) {
  std::vector<double> x, y;
  for (const auto& r : recs) {
    if (r.t >= t0 && r.t <= t1) {
      x.push_back(std::log10(r.t));
      y.push_back(r.e_original);
    }
  }
  return fit_line(x, y);
}

/// Parameter sets of the numerical examples.
namespace recipes {

/// Allen-Cahn with exp(sin(pi x) sin(pi y)) sin t on (0, 2)^2, alpha0 = 0.01^2, M = 1, T = 1.
inline RunConfig ac_case_a(SchemeKind scheme, double dt, std::size_t n = 128) {
  RunConfig c;
  c.model.eps2 = 1e-4;
  c.model.mobility = 1.0;
  c.scheme = scheme;
  c.grid = Grid(n, 2.0);
  c.dt = dt;
  c.t_final = 1.0;
  c.initial = InitialCondition::manufactured(ManufacturedCase::AcCaseA);
  return c;
}

/// Cahn-Hilliard with cos(pi x) cos(pi y) sin t, alpha0 = 0.04, M = 0.005, epsilon = 1, T = 1.
inline RunConfig ch_case_a(SchemeKind scheme, double dt, std::size_t n = 128) {
  RunConfig c;
  c.model.flow = FlowKind::Hm1;
  c.model.eps2 = 0.04;
  c.model.mobility = 0.005;
  c.model.potential = Potential::double_well(1.0);
  c.scheme = scheme;
  c.grid = Grid(n, 2.0);
  c.dt = dt;
  c.t_final = 1.0;
  c.initial = InitialCondition::manufactured(ManufacturedCase::ChCaseA);
  return c;
}

/// Allen-Cahn star relaxation on (0, 1)^2, alpha0 = 0.01^2, M = 1.
inline RunConfig ac_case_b(SchemeKind scheme, double dt, double t_final = 200.0, std::size_t n = 128) {
  RunConfig c;
  c.model.eps2 = 1e-4;
  c.model.mobility = 1.0;
  c.scheme = scheme;
  c.grid = Grid(n, 1.0);
  c.dt = dt;
  c.t_final = t_final;
  c.initial = InitialCondition::star(1e-4);
  return c;
}

/// Cahn-Hilliard 19 x 19 circles on (0, 4)^2, M = 1e-6, alpha0 = 1.6032, epsilon = 0.0079.
inline RunConfig ch_case_b(SchemeKind scheme, double dt, double t_final, std::size_t n = 512) {
  constexpr double eps = 0.0079;
  RunConfig c;
  c.model.flow = FlowKind::Hm1;
  c.model.eps2 = 1.6032;
  c.model.mobility = 1e-6;
  c.model.potential = Potential::double_well(1.0 / (eps * eps));
  c.scheme = scheme;
  c.grid = Grid(n, 4.0);
  c.dt = dt;
  c.t_final = t_final;
  c.initial = InitialCondition::circles(eps);
  return c;
}

/// Thin-film epitaxy on [0, 12.8)^2, epsilon = 0.03, M = 1, random data in [-0.001, 0.001].
/// Without slope selection E is unbounded below, so C is set large explicitly.
inline RunConfig mbe(bool slope_selection, SchemeKind scheme, double dt, double t_final, std::size_t n = 512,
                     std::uint64_t seed = 1) {
  RunConfig c;
  c.model.a_kind = OperatorKind::Bilaplacian;
  c.model.eps2 = 0.03 * 0.03;
  c.model.mobility = 1.0;
  c.model.potential = slope_selection ? Potential::mbe_slope() : Potential::mbe_no_slope();
  if (!slope_selection) c.model.energy_shift = 1e4;
  c.scheme = scheme;
  c.grid = Grid(n, 12.8);
  c.dt = dt;
  c.t_final = t_final;
  c.seed = seed;
  c.initial = InitialCondition::random_uniform(-1e-3, 1e-3);
  return c;
}

}  // namespace recipes

}  // namespace gradflow
