#pragma once

// Flat key=value run configuration. One key per line, '#' starts a comment,
// blank lines are ignored. See README.md for the key reference.

#include <cstdint>
#include <string>
#include <vector>

#include "nsms/errors.hpp"

namespace nsms {

/// Parse or validation failure. The message lists every problem found, one
/// per line, each prefixed with its line number when it has one.
class ConfigError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

struct RunConfig {
  int dimension = 1;
  std::vector<int> cells;
  std::vector<double> lengths;
  int n_species = 0;
  std::vector<double> molar_masses;
  std::vector<double> diffusivities;  // upper triangle, row by row
  double epsilon = 0.0;
  double tau = 0.0;
  double t_end = 0.0;
  double eta0 = 0.0;  // 0 disables mollification

  std::string scenario = "cosine";  // uniform | cosine | random
  std::vector<double> base_composition;  // empty: all species equal
  std::vector<double> perturbation;      // per-species weights, must sum to 0
  double amplitude = 0.0;
  std::vector<int> modes;  // per axis
  std::uint64_t seed = 1;

  std::string velocity = "zero";  // zero | vortex
  double velocity_amplitude = 0.0;

  double newton_tol = 1e-10;
  double fixedpoint_tol = 1e-14;
  double div_tol = 1e-10;

  std::string output_dir;
  int snapshot_interval = 0;  // 0: initial and final snapshots only

  // gamma > 0 selects the long-time schedule: epsilon and tau are derived.
  double gamma = 0.0;
  double log_sobolev_constant = 0.0;  // 0: 2 max(L)^2 / pi^2
};

/// Parses and fully validates; throws ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::string& path);

/// Canonical text form; parse_config(to_text(c)) reproduces c.
std::string to_text(const RunConfig& config);

}  // namespace nsms
