#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hadamard/scenario.hpp"

using namespace hadamard;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("hadamard_scenario_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(HADAMARD_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& text) {
  const auto p = dir / name;
  std::ofstream(p) << text;
  return p;
}

bool mentions(const ConfigError& e, const std::string& path, const std::string& fragment = "") {
  for (const auto& i : e.issues())
    if (i.path == path && i.message.find(fragment) != std::string::npos) return true;
  return false;
}

const char* kPowerStrict = R"(
name = "p"
strict = true
[manifold]
kind = "power"
phi = 2.0
n = 2
[exhaustion]
radii = [4.0, 6.0]
)";

}  // namespace

TEST_CASE("every preset parses and validates", "[scenario][config]") {
  for (const auto& name : preset_names()) {
    INFO(name);
    const auto cfg = validate(preset_config(name));
    CHECK(cfg.name == name);
    if (cfg.mode == "exhaustion") {
      REQUIRE(cfg.young.nu.has_value());
      CHECK(*cfg.young.nu > 0.0);
    }
  }
  CHECK_THROWS_AS(preset_config("no-such-preset"), ConfigError);
}

TEST_CASE("defaults are filled", "[scenario][config]") {
  const auto cfg = validate(parse_config("name = \"d\"\n[exhaustion]\nradii = [5.0]\n"));
  CHECK(cfg.young.eps0 == 0.5);
  CHECK(cfg.young.lambda == 1.25);
  CHECK(cfg.solver.tol == 1e-10);
  CHECK(cfg.output.dir == "out/d");
  REQUIRE(cfg.young.nu.has_value());
  CHECK(std::isfinite(*cfg.young.nu));
}

TEST_CASE("unknown keys and type errors carry paths", "[scenario][config]") {
  try {
    parse_config("[manifold]\nkind = \"power\"\nphii = 2.0\n[checks.moser]\nradus = 0.5\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(mentions(e, "manifold.phii", "unknown key"));
    CHECK(mentions(e, "checks.moser.radus", "unknown key"));
  }
  try {
    parse_config("[grid]\nn_r = 3.5\n[exhaustion]\nradii = [4.0, \"x\"]\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(mentions(e, "grid.n_r", "integer"));
    CHECK(mentions(e, "exhaustion.radii[1]", "number"));
  }
  CHECK_THROWS_AS(parse_config("[manifold\n"), ConfigError);
}

TEST_CASE("domain and strict-mode validation", "[scenario][config]") {
  SECTION("lambda outside (1, 1 + eps0)") {
    auto cfg = preset_config("young-selftest");
    cfg.young.lambda = 1.8;
    try {
      validate(cfg);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(mentions(e, "young.lambda", "(1, 1.5)"));
    }
  }
  SECTION("strict gate rejects phi = 2 in dimension 2") {
    try {
      validate(parse_config(kPowerStrict));
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(mentions(e, "manifold.n", "n > 4/phi + 1"));
    }
  }
  SECTION("strict gate accepts phi = 5 in dimension 2") {
    auto cfg = parse_config(kPowerStrict);
    cfg.manifold.phi = 5.0;
    CHECK_NOTHROW(validate(cfg));
  }
  SECTION("strict mode needs radii beyond R1") {
    auto cfg = preset_config("hyperbolic-cosine");
    cfg.exhaustion.radii = {3.0, 4.0};
    try {
      validate(cfg);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(mentions(e, "exhaustion.radii", "R1"));
    }
  }
  SECTION("every violation is reported") {
    auto cfg = preset_config("euclidean-contrast");
    cfg.grid.n_r = 1;
    cfg.solver.tol = -1.0;
    cfg.exhaustion.radii = {8.0, 4.0};
    try {
      validate(cfg);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(mentions(e, "grid.n_r"));
      CHECK(mentions(e, "solver.tol"));
      CHECK(mentions(e, "exhaustion.radii", "increasing"));
    }
  }
}

TEST_CASE("run writes the declared bundle", "[scenario][run]") {
  const auto dir = scratch("bundle");
  RunOptions opt;
  opt.output_dir = dir / "euclid";
  const auto res = run_scenario(preset_config("euclidean-contrast"), opt);
  CHECK(res.code == ExitCode::ok);
  CHECK(res.verdict == "non-attainment");
  for (const char* f : {"report.json", "attainment.csv", "attainment.svg"}) CHECK(fs::exists(dir / "euclid" / f));
  const auto report = nlohmann::json::parse(slurp(dir / "euclid" / "report.json"));
  CHECK(report["scenario"] == "euclidean-contrast");
  CHECK(report["exhaustion"]["budget_divergent"] == true);
  CHECK(report["hypotheses"]["decay"]["r_star"].is_null());
  const std::string svg = slurp(dir / "euclid" / "attainment.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);

  auto cfg = preset_config("young-selftest");
  cfg.output.formats = {"csv"};
  opt.output_dir = dir / "young";
  const auto y = run_scenario(cfg, opt);
  CHECK(y.code == ExitCode::ok);
  REQUIRE(y.files.size() == 1);
  CHECK(y.files[0].filename() == "young.csv");
}

TEST_CASE("output root from the environment", "[scenario][run]") {
  const auto dir = scratch("envroot");
  ::setenv("HADAMARD_OUTPUT_ROOT", dir.c_str(), 1);
  const auto res = run_scenario(preset_config("jacobi-selftest"));
  ::unsetenv("HADAMARD_OUTPUT_ROOT");
  CHECK(res.output_dir == dir / "jacobi-selftest");
  CHECK(fs::exists(dir / "jacobi-selftest" / "jacobi.json"));
}

TEST_CASE("cli exit codes", "[scenario][cli]") {
  const auto dir = scratch("cli");
  const std::string out = " --out " + (dir / "o").string();
  CHECK(cli("preset young-selftest" + out) == 0);
  CHECK(cli("preset --list") == 0);
  CHECK(cli("selftest") == 0);
  CHECK(cli("preset bogus") == 2);
  CHECK(cli("validate " + write_file(dir, "strict.toml", kPowerStrict).string()) == 2);
  CHECK(cli("run " + write_file(dir, "typo.toml", "[grid]\nnr = 8\n").string()) == 2);
  CHECK(cli("run " + (dir / "missing.toml").string()) == 2);

  const std::string stalled = R"(
name = "stalled"
[manifold]
kind = "constant"
a = 1.0
[exhaustion]
radii = [4.0]
relative_probes = [0.5]
[grid]
n_r = 8
n_theta = 8
[solver]
tol = 1e-14
max_iter = 1
)";
  CHECK(cli("run " + write_file(dir, "stalled.toml", stalled).string() + out) == 3);
  CHECK(cli("validate " + write_file(dir, "ok.toml", stalled).string()) == 0);
}

TEST_CASE("repeated runs are bitwise identical", "[scenario][determinism]") {
  const auto dir = scratch("determinism");
  for (const char* name : {"hyperbolic-cosine", "young-selftest"}) {
    INFO(name);
    RunOptions a, b;
    a.output_dir = dir / (std::string(name) + "_a");
    b.output_dir = dir / (std::string(name) + "_b");
    const auto ra = run_scenario(preset_config(name), a);
    const auto rb = run_scenario(preset_config(name), b);
    REQUIRE(ra.files.size() == rb.files.size());
    for (std::size_t k = 0; k < ra.files.size(); ++k) {
      INFO(ra.files[k].filename());
      CHECK(ra.files[k].filename() == rb.files[k].filename());
      CHECK(slurp(ra.files[k]) == slurp(rb.files[k]));
    }
  }
}

TEST_CASE("svg chart skips unusable points", "[scenario][svg]") {
  std::ostringstream os;
  write_svg_chart(os, "t<1>", "x", "y", {{"s", {1.0, 2.0, 3.0}, {1.0, kNaN, -1.0}}}, true);
  const std::string s = os.str();
  CHECK(s.find("t&lt;1&gt;") != std::string::npos);
  CHECK(s.find("nan") == std::string::npos);
  CHECK(s.find("<circle") != std::string::npos);
  CHECK(s.find("<circle", s.find("<circle") + 1) == std::string::npos);
}
