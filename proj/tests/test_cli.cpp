#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gradflow/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string output;
};

fs::path scratch() {
  static const fs::path dir = [] {
    const fs::path p = fs::temp_directory_path() / ("gradflow-cli-" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

Result cli(const std::string& args, const std::string& env = "") {
  const fs::path log = scratch() / "log.txt";
  const std::string cmd = env + " " + std::string(GRADFLOW_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::ostringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path p = scratch() / name;
  std::ofstream(p) << text;
  return p;
}

const char* kSmallAc = R"(
[model]
type = "allen-cahn"
eps2 = 1e-2

[scheme]
name = "pssav"
order = 2

[grid]
n = 32
L = 2

[time]
dt = 1e-2
T = 0.5

[initial]
type = "random"
lo = -0.5
hi = 0.5
seed = 3

[output]
snapshot_times = [0.25]
)";

const char* kTable1 = R"(
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

[initial]
type = "manufactured"
case = "ac-a"
)";

}  // namespace

TEST_CASE("run writes diagnostics and snapshots") {
  const fs::path cfg = write_config("ac.toml", kSmallAc);
  const fs::path out1 = scratch() / "run1";
  const fs::path out2 = scratch() / "run2";
  REQUIRE(cli("run --config " + cfg.string() + " --out " + out1.string()).code == 0);
  REQUIRE(cli("run --config " + cfg.string() + " --out " + out2.string()).code == 0);
  const std::string diag = slurp(out1 / "diagnostics.csv");
  CHECK(diag.rfind("step,t,E_original,E_modified,aux,xi,xi_error,mass,dissipation,flags\n", 0) == 0);
  CHECK(gradflow::io::read_diagnostics(out1 / "diagnostics.csv").size() == 51);
  CHECK(diag == slurp(out2 / "diagnostics.csv"));
  CHECK(fs::exists(out1 / "snapshot_00000025.csv"));
  CHECK(fs::exists(out1 / "final.csv"));
  CHECK(gradflow::io::read_snapshot(out1 / "snapshot_00000025.csv").t == 0.25);
}

TEST_CASE("overrides reach the run") {
  const fs::path cfg = write_config("ac.toml", kSmallAc);
  const fs::path out = scratch() / "run-set";
  REQUIRE(cli("run --config " + cfg.string() + " --out " + out.string() + " --set time.T=0.3 --set scheme.name=rpssav")
              .code == 0);
  CHECK(gradflow::io::read_diagnostics(out / "diagnostics.csv").back().step == 30);
}

TEST_CASE("config errors exit with 2") {
  const fs::path cfg = write_config("ac.toml", kSmallAc);
  const fs::path out = scratch() / "bad";
  const Result dt0 = cli("run --config " + cfg.string() + " --out " + out.string() + " --set time.dt=0");
  CHECK(dt0.code == 2);
  CHECK(dt0.output.find("dt must be positive") != std::string::npos);
  CHECK(cli("run --config " + (scratch() / "missing.toml").string() + " --out " + out.string()).code == 2);
  CHECK(cli("run --config " + cfg.string() + " --out " + out.string() + " --set model.type=mbe-slope --set scheme.name=sav")
            .code == 2);
  CHECK(cli("frobnicate").code == 2);
  CHECK(cli("converge --config " + cfg.string() + " --out " + out.string()).code == 2);
}

TEST_CASE("blowup exits with 3") {
  const fs::path cfg = write_config("ac.toml", kSmallAc);
  const Result r = cli("run --config " + cfg.string() + " --out " + (scratch() / "blow").string() +
                       " --set initial.type=constant --set initial.value=1e9");
  CHECK(r.code == 3);
  CHECK(r.output.find("blowup") != std::string::npos);
}

TEST_CASE("converge reproduces the first-order PS-SAV Allen-Cahn table") {
  const fs::path cfg = write_config("table1.toml", kTable1);
  const fs::path out = scratch() / "conv";
  REQUIRE(cli("converge --config " + cfg.string() + " --dts 1e-2,5e-3,2.5e-3,1.25e-3,6.25e-4 --out " + out.string())
              .code == 0);
  const auto table = gradflow::io::read_table(out / "table.csv");
  const double paper[] = {1.35e-2, 6.74e-3, 3.37e-3, 1.68e-3, 8.41e-4};
  REQUIRE(table.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    INFO("row " << i << ": " << table[i].error);
    CHECK(std::abs(table[i].error - paper[i]) <= 0.2 * paper[i]);
  }
  CHECK(std::isnan(table[0].rate));
}

TEST_CASE("the thread count does not change results") {
  const fs::path cfg = write_config("table1.toml", kTable1);
  const std::string args = "converge --config " + cfg.string() + " --set grid.n=32 --set time.T=0.1 --dts 1e-2,5e-3,2.5e-3";
  REQUIRE(cli(args + " --out " + (scratch() / "t1").string(), "GRADFLOW_THREADS=1").code == 0);
  REQUIRE(cli(args + " --out " + (scratch() / "t3").string(), "GRADFLOW_THREADS=3").code == 0);
  CHECK(slurp(scratch() / "t1" / "table.csv") == slurp(scratch() / "t3" / "table.csv"));
}

TEST_CASE("compare writes one column per scheme") {
  const fs::path cfg = write_config("ac.toml", kSmallAc);
  const fs::path out = scratch() / "cmp";
  const std::string base = "compare --config " + cfg.string() + " --out " + out.string() +
                           " --set time.T=0.3 --dts 1e-2,5e-3 --reference-dt 1e-4";
  REQUIRE(cli(base + " --schemes sav,gsav,pssav,rpssav").code == 0);
  const std::string text = slurp(out / "comparison.csv");
  CHECK(text.rfind("dt,sav2,gsav2,pssav2,rpssav2\n", 0) == 0);
  CHECK(std::distance(fs::directory_iterator(out / "cache"), fs::directory_iterator{}) == 1);
  CHECK(cli(base + " --schemes sav1,pssav1").code == 0);
  CHECK(slurp(out / "comparison.csv").rfind("dt,sav1,pssav1\n", 0) == 0);
  CHECK(cli(base + " --schemes euler").code == 2);
}

TEST_CASE("verify passes and catches an injected fault") {
  const Result ok = cli("verify");
  CHECK(ok.code == 0);
  CHECK(ok.output.find("FAIL") == std::string::npos);
  const Result bad = cli("verify --inject-fault sign");
  CHECK(bad.code == 4);
  CHECK(bad.output.find("FAIL positivity") != std::string::npos);
  fs::remove_all(scratch());
}
