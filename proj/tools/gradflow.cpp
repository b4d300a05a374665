#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "gradflow/config.hpp"
#include "gradflow/harness.hpp"
#include "gradflow/io.hpp"
#include "gradflow/verify.hpp"

namespace fs = std::filesystem;
using namespace gradflow;

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kBlowup = 3, kVerify = 4 };

struct Common {
  std::string config;
  std::string out = "out";
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c, bool needs_out) {
  cmd->add_option("--config", c.config, "TOML run configuration")->required()->check(CLI::ExistingFile);
  auto* out = cmd->add_option("--out", c.out, "output directory");
  if (needs_out) out->required();
  cmd->add_option("--set", c.overrides, "override a config value, e.g. time.dt=1e-3")->take_all();
}

std::vector<double> parse_dts(const std::string& list) {
  std::vector<double> dts;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || *end != '\0' || !(v > 0.0)) throw ConfigError("bad time step '" + item + "' in --dts");
    dts.push_back(v);
  }
  if (dts.empty()) throw ConfigError("--dts needs at least one value");
  return dts;
}

/// "pssav", "rpssav", "gsav2", ... The order defaults to the configured one.
SchemeKind parse_scheme_name(std::string name, Order fallback) {
  SchemeKind k;
  k.order = fallback;
  if (!name.empty() && (name.back() == '1' || name.back() == '2')) {
    k.order = name.back() == '1' ? Order::First : Order::Second;
    name.pop_back();
  }
  if (name.rfind("r", 0) == 0 && name != "r") {
    k.relaxed = true;
    name.erase(0, 1);
  }
  if (name == "sav") {
    k.family = Family::Sav;
  } else if (name == "gsav") {
    k.family = Family::Gsav;
  } else if (name == "pssav") {
    k.family = Family::Pssav;
  } else {
    throw ConfigError("unknown scheme '" + name + "' in --schemes");
  }
  return k;
}

void print_table(const ConvergenceTable& table) {
  std::printf("%12s  %12s  %6s\n", "dt", "error", "rate");
  for (const auto& r : table) std::printf("%12.4e  %12.4e  %6.2f\n", r.dt, r.error, r.rate);
}

int cmd_run(const Common& c) {
  const RunConfig cfg = config::parse_config(c.config, c.overrides);
  const RunResult r = run(cfg);
  const fs::path out(c.out);
  io::write_diagnostics(r.records, out / "diagnostics.csv");
  for (const auto& s : r.snapshots) {
    char name[48];
    std::snprintf(name, sizeof name, "snapshot_%08ld.csv", s.step);
    io::write_snapshot(s.phi, s.t, out / name);
  }
  io::write_snapshot(r.state.phi, r.state.t, out / "final.csv");
  const auto& last = r.records.back();
  std::printf("%s: %ld steps to t=%g, E=%.10g, aux=%.10g, C=%g\n", to_string(cfg.scheme).c_str(),
              r.state.step_index, r.state.t, last.e_original, last.aux, r.energy_shift);
  return kOk;
}

int cmd_converge(const Common& c, const std::string& dts) {
  const RunConfig cfg = config::parse_config(c.config, c.overrides);
  const ConvergenceTable table = convergence_study(cfg, parse_dts(dts));
  io::write_table(table, fs::path(c.out) / "table.csv");
  print_table(table);
  return kOk;
}

int cmd_compare(const Common& c, const std::string& schemes, const std::string& dts, double ref_dt,
                const std::string& cache) {
  const RunConfig cfg = config::parse_config(c.config, c.overrides);
  std::vector<SchemeKind> kinds;
  std::stringstream ss(schemes);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const SchemeKind k = parse_scheme_name(item, cfg.scheme.order);
    k.validate(cfg.model);
    kinds.push_back(k);
  }
  if (kinds.empty()) throw ConfigError("--schemes needs at least one scheme");
  if (!(ref_dt > 0.0)) throw ConfigError("--reference-dt must be positive");
  const fs::path cache_dir = cache.empty() ? fs::path(c.out) / "cache" : fs::path(cache);
  fs::create_directories(cache_dir);
  const RealField ref = cached_reference(cfg, ref_dt, cache_dir);
  const ComparisonTable table = compare_approaches(cfg, kinds, parse_dts(dts), ref);
  io::write_comparison(table, fs::path(c.out) / "comparison.csv");
  std::printf("%12s", "dt");
  for (const auto& n : table.names) std::printf("  %12s", n.c_str());
  std::printf("\n");
  for (std::size_t i = 0; i < table.dts.size(); ++i) {
    std::printf("%12.4e", table.dts[i]);
    for (double e : table.errors[i]) std::printf("  %12.4e", e);
    std::printf("\n");
  }
  return kOk;
}

int cmd_verify(const std::string& fault) {
  verify::VerifyOptions opt;
  if (fault == "sign") {
    opt.root = &verify::sign_error_root;
  } else if (!fault.empty()) {
    throw ConfigError("unknown fault '" + fault + "'");
  }
  bool all = true;
  for (const auto& r : verify::run_suite(opt)) {
    std::printf("%-4s %-22s %s (%.1fs)\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str(), r.seconds);
    all = all && r.passed;
  }
  return all ? kOk : kVerify;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-flow solvers: SAV, GSAV and PS-SAV time stepping"};
  app.require_subcommand(1);

  Common run_opts, conv_opts, cmp_opts;
  std::string conv_dts = "1e-2,5e-3,2.5e-3,1.25e-3,6.25e-4";
  std::string cmp_dts = "1e-2,5e-3,2.5e-3,1.25e-3";
  std::string schemes = "sav,gsav,pssav,rpssav";
  std::string cache;
  double ref_dt = 1e-5;
  std::string fault;

  auto* run_cmd = app.add_subcommand("run", "integrate one configuration and write diagnostics");
  add_common(run_cmd, run_opts, true);

  auto* conv_cmd = app.add_subcommand("converge", "manufactured-solution convergence table");
  add_common(conv_cmd, conv_opts, true);
  conv_cmd->add_option("--dts", conv_dts, "comma-separated time steps");

  auto* cmp_cmd = app.add_subcommand("compare", "errors of several schemes against a semi-implicit reference");
  add_common(cmp_cmd, cmp_opts, true);
  cmp_cmd->add_option("--schemes", schemes, "comma-separated: sav, gsav, pssav, rpssav (optional order suffix 1/2)");
  cmp_cmd->add_option("--dts", cmp_dts, "comma-separated time steps");
  cmp_cmd->add_option("--reference-dt", ref_dt, "time step of the reference run");
  cmp_cmd->add_option("--cache", cache, "reference cache directory (default <out>/cache)");

  auto* verify_cmd = app.add_subcommand("verify", "run the invariant suite");
  verify_cmd->add_option("--inject-fault", fault, "test fixture: 'sign' flips the quadratic's constant term")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*run_cmd) return cmd_run(run_opts);
    if (*conv_cmd) return cmd_converge(conv_opts, conv_dts);
    if (*cmp_cmd) return cmd_compare(cmp_opts, schemes, cmp_dts, ref_dt, cache);
    return cmd_verify(fault);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const NumericalBlowup& e) {
    std::fprintf(stderr, "numerical blowup at step %ld: %s\n", e.step(), e.what());
    return kBlowup;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kOther;
  }
}
