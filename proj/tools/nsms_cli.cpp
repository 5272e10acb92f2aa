// nsms command line front end.
//
//   nsms run <config> [-o dir]     run a simulation, write diagnostics.csv
//   nsms run --preset NAME         the same with a built-in config
//   nsms check <config>            validate only
//   nsms presets [--show NAME]     list built-in configs
//
// Exit codes: 0 success, 1 config error, 2 solver failure.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "nsms/config.hpp"
#include "nsms/coupled.hpp"
#include "nsms/presets.hpp"

namespace {

constexpr int kConfigError = 1;
constexpr int kSolverError = 2;

nsms::RunConfig load(const std::string& path, const std::string& preset) {
  if (!preset.empty()) {
    const nsms::Preset* p = nsms::find_preset(preset);
    if (!p) throw nsms::ConfigError("unknown preset '" + preset + "'");
    return nsms::parse_config(p->text);
  }
  if (path.empty()) throw nsms::ConfigError("give a config file or --preset");
  return nsms::load_config_file(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Navier-Stokes-Maxwell-Stefan mixture simulator"};
  app.require_subcommand(1);

  std::string config_path, preset, output_dir;
  auto* run = app.add_subcommand("run", "run a simulation");
  run->add_option("config", config_path, "config file");
  run->add_option("--preset", preset, "use a built-in config");
  run->add_option("-o,--output", output_dir, "output directory (overrides output_dir)");

  std::string check_path, check_preset;
  auto* check = app.add_subcommand("check", "validate a config");
  check->add_option("config", check_path, "config file");
  check->add_option("--preset", check_preset, "check a built-in config");

  std::string show;
  auto* list = app.add_subcommand("presets", "list built-in configs");
  list->add_option("--show", show, "print the config text of one preset");

  CLI11_PARSE(app, argc, argv);

  if (list->parsed()) {
    if (show.empty()) {
      for (const auto& p : nsms::presets()) std::cout << p.name << "\t" << p.description << "\n";
      return 0;
    }
    const nsms::Preset* p = nsms::find_preset(show);
    if (!p) {
      std::cerr << "error: unknown preset '" << show << "'\n";
      return kConfigError;
    }
    std::cout << p->text;
    return 0;
  }

  if (check->parsed()) {
    try {
      const nsms::RunConfig cfg = load(check_path, check_preset);
      nsms::build_setup(cfg);
    } catch (const nsms::InvalidInput& e) {
      std::cerr << "error:\n" << e.what() << "\n";
      return kConfigError;
    }
    std::cout << "OK\n";
    return 0;
  }

  nsms::RunConfig cfg;
  try {
    cfg = load(config_path, preset);
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    if (cfg.output_dir.empty()) cfg.output_dir = preset.empty() ? "nsms_out" : preset;
    nsms::build_setup(cfg);
  } catch (const nsms::InvalidInput& e) {
    std::cerr << "error:\n" << e.what() << "\n";
    return kConfigError;
  }

  nsms::RunResult result;
  try {
    result = nsms::run_simulation(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolverError;
  }
  std::cout << result.diagnostics_path << "\n";
  if (!result.ok) {
    std::cerr << "solver failure at step " << result.failed_step << ": " << result.error
              << "\nlast good state written to " << cfg.output_dir << "\n";
    return kSolverError;
  }
  return 0;
}
