#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "gradflow/config.hpp"

using namespace gradflow;

namespace {

const char* kMinimal = R"(
[model]
type = "allen-cahn"
eps2 = 1e-4
M = 1

[scheme]
name = "pssav"
order = 1

[grid]
n = 128
L = 2

[time]
dt = 1e-2
T = 1
)";

}  // namespace

TEST_CASE("minimal Allen-Cahn config") {
  const RunConfig c = config::parse_config_string(kMinimal);
  CHECK(c.model.flow == FlowKind::L2);
  CHECK(c.model.eps2 == 1e-4);
  CHECK(c.model.mobility == 1.0);
  CHECK(!c.model.energy_shift.has_value());
  CHECK(c.scheme.family == Family::Pssav);
  CHECK(c.scheme.order == Order::First);
  CHECK(!c.scheme.relaxed);
  CHECK(c.grid == Grid(128, 2.0));
  CHECK(c.dt == 1e-2);
  CHECK(c.t_final == 1.0);
  CHECK(c.steps() == 100);
  CHECK(c.initial.kind == InitialKind::Constant);
}

TEST_CASE("dt = 0 is rejected") {
  CHECK_THROWS_WITH(config::parse_config_string(kMinimal, {"time.dt=0"}), "dt must be positive");
}

TEST_CASE("scope rule: baseline SAV cannot run MBE") {
  CHECK_THROWS_AS(config::parse_config_string(kMinimal, {"model.type=mbe-slope", "scheme.name=sav"}), ConfigError);
  CHECK_NOTHROW(config::parse_config_string(kMinimal, {"model.type=mbe-slope"}));
}

TEST_CASE("unknown keys and sections are errors") {
  CHECK_THROWS_WITH(config::parse_config_string(std::string(kMinimal) + "\n[extra]\nx = 1\n"),
                    Catch::Matchers::ContainsSubstring("unknown section"));
  CHECK_THROWS_WITH(config::parse_config_string(kMinimal, {"time.dtt=1"}),
                    Catch::Matchers::ContainsSubstring("unknown key 'time.dtt'"));
}

TEST_CASE("parse errors carry line numbers") {
  const std::string broken = std::string(kMinimal) + "\n[grid\n";
  CHECK_THROWS_WITH(config::parse_config_string(broken, {}, "run.toml"),
                    Catch::Matchers::StartsWith("run.toml:19:"));
}

TEST_CASE("overrides apply before validation") {
  const RunConfig c = config::parse_config_string(
      kMinimal, {"scheme.name=rpssav", "scheme.order=2", "time.dt=2.5e-3", "model.C=7", "output.snapshot_times=[0.5, 1.0]"});
  CHECK(c.scheme.relaxed);
  CHECK(c.scheme.order == Order::Second);
  CHECK(c.dt == 2.5e-3);
  CHECK(*c.model.energy_shift == 7.0);
  CHECK(c.snapshot_times == std::vector<double>{0.5, 1.0});
  // An override can repair an otherwise invalid file.
  CHECK_NOTHROW(config::parse_config_string(std::string(kMinimal) + "\n", {"time.T=2"}));
  CHECK_THROWS_AS(config::parse_config_string(kMinimal, {"nodot=1"}), ConfigError);
  CHECK_THROWS_AS(config::parse_config_string(kMinimal, {"time.dt"}), ConfigError);
}

TEST_CASE("type errors") {
  CHECK_THROWS_WITH(config::parse_config_string(kMinimal, {"time.dt=fast"}),
                    Catch::Matchers::ContainsSubstring("time.dt must be a number"));
  CHECK_THROWS_AS(config::parse_config_string(kMinimal, {"grid.n=100"}), ConfigError);
  CHECK_THROWS_AS(config::parse_config_string(kMinimal, {"scheme.order=3"}), ConfigError);
  CHECK_THROWS_AS(config::parse_config_string(kMinimal, {"model.type=navier-stokes"}), ConfigError);
  CHECK_THROWS_AS(config::parse_config_string(kMinimal, {"model.type=mbe-slope", "model.scale=2"}), ConfigError);
}

TEST_CASE("model and initial variants") {
  const RunConfig ch = config::parse_config_string(
      kMinimal, {"model.type=cahn-hilliard", "model.scale=16022.4", "initial.type=circles", "initial.epsilon=0.0079",
                 "grid.L=4"});
  CHECK(ch.model.flow == FlowKind::Hm1);
  CHECK(ch.model.potential.scale == 16022.4);
  CHECK(ch.initial.kind == InitialKind::Circles19);

  const RunConfig mbe = config::parse_config_string(
      kMinimal, {"model.type=mbe-noslope", "initial.type=random", "initial.lo=-1e-3", "initial.hi=1e-3",
                 "initial.seed=9", "time.bootstrap=first-order"});
  CHECK(mbe.model.a_kind == OperatorKind::Bilaplacian);
  CHECK(mbe.model.potential.type == PotentialType::MbeNoSlope);
  CHECK(mbe.seed == 9);
  CHECK(mbe.bootstrap == Bootstrap::FirstOrder);

  const RunConfig man = config::parse_config_string(kMinimal, {"initial.type=manufactured", "initial.case=ch-a"});
  CHECK(man.initial.kind == InitialKind::Manufactured);
  CHECK(man.initial.mcase == ManufacturedCase::ChCaseA);
  CHECK_THROWS_AS(config::parse_config_string(kMinimal, {"initial.type=manufactured"}), ConfigError);
}

TEST_CASE("config files") {
  const auto path = std::filesystem::temp_directory_path() / "gradflow-config-test.toml";
  std::ofstream(path) << kMinimal;
  CHECK(config::parse_config(path).dt == 1e-2);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(config::parse_config(path), ConfigError);
}
