#include <CLI11.hpp>

#include <iostream>

#include "hadamard/scenario.hpp"

namespace {

using hadamard::ExitCode;

int report_config_error(const hadamard::ConfigError& e) {
  for (const auto& issue : e.issues()) std::cerr << "error: " << issue.path << ": " << issue.message << "\n";
  return static_cast<int>(ExitCode::invalid_config);
}

int run(const hadamard::ScenarioConfig& cfg, const hadamard::RunOptions& opt) {
  try {
    const auto result = hadamard::run_scenario(cfg, opt);
    for (const auto& f : result.files) std::cout << "wrote " << f.string() << "\n";
    for (const auto& c : result.checks)
      std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
    if (!result.verdict.empty()) std::cout << "verdict: " << result.verdict << "\n";
    if (result.code == ExitCode::not_converged) std::cerr << "error: a solve did not converge\n";
    return static_cast<int>(result.code);
  } catch (const hadamard::ConfigError& e) {
    return report_config_error(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::failure);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dirichlet problem at infinity for the minimal graph equation on rotationally symmetric manifolds"};
  app.require_subcommand(1);

  std::string config_path;
  std::string preset_name;
  std::string out_dir;
  bool timing = false;
  bool print = false;
  bool list = false;

  auto* validate = app.add_subcommand("validate", "Check a scenario file and print the normalized config");
  validate->add_option("config", config_path, "TOML scenario file")->required();

  auto* run_cmd = app.add_subcommand("run", "Run a scenario file");
  run_cmd->add_option("config", config_path, "TOML scenario file")->required();
  run_cmd->add_option("--out", out_dir, "Output directory");
  run_cmd->add_flag("--timing", timing, "Record wall-clock times in reports");

  auto* preset = app.add_subcommand("preset", "Run, print or list built-in scenarios");
  preset->add_option("name", preset_name, "Preset name");
  preset->add_option("--out", out_dir, "Output directory");
  preset->add_flag("--timing", timing, "Record wall-clock times in reports");
  preset->add_flag("--print", print, "Print the preset TOML instead of running it");
  preset->add_flag("--list", list, "List preset names");

  auto* selftest = app.add_subcommand("selftest", "Run the Jacobi and Young self tests without writing files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::invalid_config);
  }

  hadamard::RunOptions opt;
  opt.timing = timing;
  if (!out_dir.empty()) opt.output_dir = out_dir;

  if (*validate) {
    try {
      const auto cfg = hadamard::validate(hadamard::load_config(config_path));
      std::cout << hadamard::config_json(cfg).dump(2) << "\n";
      return 0;
    } catch (const hadamard::ConfigError& e) {
      return report_config_error(e);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return static_cast<int>(ExitCode::failure);
    }
  }

  if (*run_cmd) {
    try {
      return run(hadamard::load_config(config_path), opt);
    } catch (const hadamard::ConfigError& e) {
      return report_config_error(e);
    }
  }

  if (*preset) {
    if (list) {
      for (const auto& name : hadamard::preset_names()) std::cout << name << "\n";
      return 0;
    }
    if (preset_name.empty()) {
      std::cerr << "error: preset name required (see --list)\n";
      return static_cast<int>(ExitCode::invalid_config);
    }
    const auto& sources = hadamard::preset_sources();
    const auto it = sources.find(preset_name);
    if (it == sources.end()) {
      std::cerr << "error: unknown preset '" << preset_name << "'\n";
      return static_cast<int>(ExitCode::invalid_config);
    }
    if (print) {
      std::cout << it->second;
      return 0;
    }
    return run(hadamard::preset_config(preset_name), opt);
  }

  if (*selftest) {
    const auto h = hadamard::build_density(0.5, 1.25);
    const auto phi = hadamard::build_phi(hadamard::young_from_density(h));
    const auto g1 = hadamard::build_G1_F1(h);
    auto checks = hadamard::jacobi_selftest().checks;
    const auto young = hadamard::young_selftest(phi, g1).checks;
    checks.insert(checks.end(), young.begin(), young.end());
    bool ok = true;
    for (const auto& c : checks) {
      std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
      ok = ok && c.pass;
    }
    return ok ? 0 : static_cast<int>(ExitCode::failure);
  }
  return 0;
}
