#include "nsms/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "nsms/mixture.hpp"

namespace nsms {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

bool to_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

template <typename Int>
bool to_int(const std::string& s, Int& out) {
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

enum class Kind { Int, Real, IntList, RealList, Text, Seed };

const std::map<std::string, Kind>& key_kinds() {
  static const std::map<std::string, Kind> kinds = {
      {"dimension", Kind::Int},          {"cells", Kind::IntList},
      {"lengths", Kind::RealList},       {"n_species", Kind::Int},
      {"molar_masses", Kind::RealList},  {"diffusivities", Kind::RealList},
      {"epsilon", Kind::Real},           {"tau", Kind::Real},
      {"t_end", Kind::Real},             {"eta0", Kind::Real},
      {"scenario", Kind::Text},          {"base_composition", Kind::RealList},
      {"perturbation", Kind::RealList},  {"amplitude", Kind::Real},
      {"modes", Kind::IntList},          {"seed", Kind::Seed},
      {"velocity", Kind::Text},          {"velocity_amplitude", Kind::Real},
      {"newton_tol", Kind::Real},        {"fixedpoint_tol", Kind::Real},
      {"div_tol", Kind::Real},           {"output_dir", Kind::Text},
      {"snapshot_interval", Kind::Int},  {"gamma", Kind::Real},
      {"log_sobolev_constant", Kind::Real},
  };
  return kinds;
}

struct Entry {
  std::string value;
  int line = 0;
};

class Errors {
 public:
  void add(int line, const std::string& msg) {
    std::ostringstream os;
    if (line > 0) os << "line " << line << ": ";
    os << msg;
    list_.push_back(os.str());
  }
  void add(const std::string& msg) { add(0, msg); }
  bool empty() const { return list_.empty(); }
  [[noreturn]] void raise() const {
    std::string all;
    for (const auto& m : list_) all += m + "\n";
    if (!all.empty()) all.pop_back();
    throw ConfigError(all);
  }

 private:
  std::vector<std::string> list_;
};

}  // namespace

RunConfig parse_config(const std::string& text) {
  Errors errors;
  std::map<std::string, Entry> entries;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.add(line_no, "expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!key_kinds().count(key)) {
      errors.add(line_no, "unknown key '" + key + "'");
      continue;
    }
    if (auto it = entries.find(key); it != entries.end()) {
      errors.add(line_no, "duplicate key '" + key + "' (first set on line " +
                              std::to_string(it->second.line) + ")");
      continue;
    }
    if (value.empty()) {
      errors.add(line_no, "key '" + key + "' has no value");
      continue;
    }
    entries[key] = {value, line_no};
  }

  RunConfig c;
  auto get_int = [&](const char* key, int& out) {
    auto it = entries.find(key);
    if (it == entries.end()) return false;
    if (!to_int(it->second.value, out)) {
      errors.add(it->second.line, std::string(key) + ": expected an integer");
    }
    return true;
  };
  auto get_real = [&](const char* key, double& out) {
    auto it = entries.find(key);
    if (it == entries.end()) return false;
    if (!to_double(it->second.value, out)) {
      errors.add(it->second.line, std::string(key) + ": expected a finite number");
    }
    return true;
  };
  auto get_reals = [&](const char* key, std::vector<double>& out) {
    auto it = entries.find(key);
    if (it == entries.end()) return false;
    out.clear();
    for (const auto& item : split_list(it->second.value)) {
      double v = 0.0;
      if (!to_double(item, v)) {
        errors.add(it->second.line, std::string(key) + ": '" + item + "' is not a finite number");
        out.clear();
        break;
      }
      out.push_back(v);
    }
    return true;
  };
  auto get_ints = [&](const char* key, std::vector<int>& out) {
    auto it = entries.find(key);
    if (it == entries.end()) return false;
    out.clear();
    for (const auto& item : split_list(it->second.value)) {
      int v = 0;
      if (!to_int(item, v)) {
        errors.add(it->second.line, std::string(key) + ": '" + item + "' is not an integer");
        out.clear();
        break;
      }
      out.push_back(v);
    }
    return true;
  };
  auto get_text = [&](const char* key, std::string& out) {
    auto it = entries.find(key);
    if (it == entries.end()) return false;
    out = it->second.value;
    return true;
  };
  auto line_of = [&](const char* key) {
    auto it = entries.find(key);
    return it == entries.end() ? 0 : it->second.line;
  };

  get_int("dimension", c.dimension);
  const bool has_cells = get_ints("cells", c.cells);
  if (!get_reals("lengths", c.lengths)) c.lengths.assign(std::clamp(c.dimension, 1, 2), 1.0);
  const bool has_n = get_int("n_species", c.n_species);
  const bool has_m = get_reals("molar_masses", c.molar_masses);
  const bool has_d = get_reals("diffusivities", c.diffusivities);
  const bool has_eps = get_real("epsilon", c.epsilon);
  const bool has_tau = get_real("tau", c.tau);
  const bool has_t = get_real("t_end", c.t_end);
  get_real("eta0", c.eta0);
  get_text("scenario", c.scenario);
  get_reals("base_composition", c.base_composition);
  get_reals("perturbation", c.perturbation);
  get_real("amplitude", c.amplitude);
  get_ints("modes", c.modes);
  if (auto it = entries.find("seed"); it != entries.end()) {
    if (!to_int(it->second.value, c.seed)) {
      errors.add(it->second.line, "seed: expected a non-negative integer");
    }
  }
  get_text("velocity", c.velocity);
  get_real("velocity_amplitude", c.velocity_amplitude);
  get_real("newton_tol", c.newton_tol);
  get_real("fixedpoint_tol", c.fixedpoint_tol);
  get_real("div_tol", c.div_tol);
  get_text("output_dir", c.output_dir);
  get_int("snapshot_interval", c.snapshot_interval);
  get_real("gamma", c.gamma);
  get_real("log_sobolev_constant", c.log_sobolev_constant);

  // Semantic rules. Every violation is reported.
  if (c.dimension != 1 && c.dimension != 2) {
    errors.add(line_of("dimension"), "dimension must be 1 or 2");
  }
  const auto dim = static_cast<std::size_t>(std::clamp(c.dimension, 1, 2));
  if (!has_cells) {
    errors.add("missing required key 'cells'");
  } else if (c.cells.size() != dim) {
    errors.add(line_of("cells"), "cells: expected " + std::to_string(dim) + " entries");
  } else if (std::any_of(c.cells.begin(), c.cells.end(), [](int n) { return n < 4; })) {
    errors.add(line_of("cells"), "cells: every axis needs at least 4 cells");
  }
  if (c.lengths.size() != dim) {
    errors.add(line_of("lengths"), "lengths: expected " + std::to_string(dim) + " entries");
  } else if (std::any_of(c.lengths.begin(), c.lengths.end(), [](double l) { return !(l > 0.0); })) {
    errors.add(line_of("lengths"), "lengths must be positive");
  }

  const int n1 = c.n_species;
  if (!has_n) {
    errors.add("missing required key 'n_species'");
  } else if (n1 < 2 || n1 > kMaxSpecies) {
    errors.add(line_of("n_species"),
               "n_species must lie in [2, " + std::to_string(kMaxSpecies) + "]");
  }
  const bool n_ok = has_n && n1 >= 2 && n1 <= kMaxSpecies;
  if (!has_m) {
    errors.add("missing required key 'molar_masses'");
  } else if (n_ok && c.molar_masses.size() != static_cast<std::size_t>(n1)) {
    errors.add(line_of("molar_masses"), "molar_masses: expected " + std::to_string(n1) +
                                            " entries, got " +
                                            std::to_string(c.molar_masses.size()));
  } else if (std::any_of(c.molar_masses.begin(), c.molar_masses.end(),
                         [](double m) { return !(m > 0.0); })) {
    errors.add(line_of("molar_masses"), "molar masses must be positive");
  }
  if (!has_d) {
    errors.add("missing required key 'diffusivities'");
  } else if (n_ok) {
    const std::size_t expected = static_cast<std::size_t>(n1) * (n1 - 1) / 2;
    if (c.diffusivities.size() != expected) {
      errors.add(line_of("diffusivities"),
                 "diffusivities: expected " + std::to_string(expected) + " entries (" +
                     std::to_string(n1) + " choose 2, upper triangle row by row), got " +
                     std::to_string(c.diffusivities.size()));
    }
  }
  if (std::any_of(c.diffusivities.begin(), c.diffusivities.end(),
                  [](double d) { return !(d > 0.0); })) {
    errors.add(line_of("diffusivities"), "diffusivities must be positive");
  }

  if (c.gamma < 0.0) errors.add(line_of("gamma"), "gamma must be >= 0");
  if (c.gamma > 0.0) {
    if (has_tau) errors.add(line_of("tau"), "tau is derived from gamma; remove it");
    if (has_eps) errors.add(line_of("epsilon"), "epsilon is derived from gamma; remove it");
  } else {
    if (!has_tau) errors.add("missing required key 'tau'");
    else if (!(c.tau > 0.0)) errors.add(line_of("tau"), "tau must be > 0");
    if (c.epsilon < 0.0) errors.add(line_of("epsilon"), "epsilon must be >= 0");
  }
  if (c.log_sobolev_constant < 0.0) {
    errors.add(line_of("log_sobolev_constant"), "log_sobolev_constant must be >= 0");
  }
  if (!has_t) errors.add("missing required key 't_end'");
  else if (!(c.t_end > 0.0)) errors.add(line_of("t_end"), "t_end must be > 0");
  if (n_ok && (c.eta0 < 0.0 || c.eta0 > 1.0 / (2.0 * n1))) {
    errors.add(line_of("eta0"), "eta0 must lie in [0, 1/(2 n_species)]");
  }

  static const std::set<std::string> scenarios = {"uniform", "cosine", "random"};
  if (!scenarios.count(c.scenario)) {
    errors.add(line_of("scenario"), "scenario must be one of uniform, cosine, random");
  }
  if (c.velocity != "zero" && c.velocity != "vortex") {
    errors.add(line_of("velocity"), "velocity must be zero or vortex");
  } else if (c.velocity == "vortex" && c.dimension != 2) {
    errors.add(line_of("velocity"), "a vortex velocity needs dimension = 2");
  }
  if (!c.base_composition.empty() && n_ok) {
    if (c.base_composition.size() != static_cast<std::size_t>(n1)) {
      errors.add(line_of("base_composition"),
                 "base_composition: expected " + std::to_string(n1) + " entries");
    } else {
      double sum = 0.0;
      for (double b : c.base_composition) {
        sum += b;
        if (!(b > 0.0 && b < 1.0)) {
          errors.add(line_of("base_composition"), "base_composition entries must lie in (0,1)");
          break;
        }
      }
      if (std::abs(sum - 1.0) > 1e-12) {
        errors.add(line_of("base_composition"), "base_composition must sum to 1");
      }
    }
  }
  if (!c.perturbation.empty() && n_ok) {
    if (c.perturbation.size() != static_cast<std::size_t>(n1)) {
      errors.add(line_of("perturbation"),
                 "perturbation: expected " + std::to_string(n1) + " entries");
    } else {
      double sum = 0.0;
      for (double p : c.perturbation) sum += p;
      if (std::abs(sum) > 1e-12) errors.add(line_of("perturbation"), "perturbation must sum to 0");
    }
  }
  if (c.amplitude < 0.0) errors.add(line_of("amplitude"), "amplitude must be >= 0");
  if (!c.modes.empty()) {
    const std::size_t want = c.scenario == "random" ? 1 : dim;
    if (c.modes.size() != want) {
      errors.add(line_of("modes"), "modes: expected " + std::to_string(want) + " entries");
    } else if (std::any_of(c.modes.begin(), c.modes.end(), [](int m) { return m < 0; })) {
      errors.add(line_of("modes"), "modes must be >= 0");
    } else if (c.scenario == "random" && c.modes[0] < 1) {
      errors.add(line_of("modes"), "random scenario needs modes >= 1");
    }
  }
  if (!(c.newton_tol > 0.0)) errors.add(line_of("newton_tol"), "newton_tol must be > 0");
  if (!(c.fixedpoint_tol > 0.0)) {
    errors.add(line_of("fixedpoint_tol"), "fixedpoint_tol must be > 0");
  }
  if (!(c.div_tol > 0.0)) errors.add(line_of("div_tol"), "div_tol must be > 0");
  if (c.snapshot_interval < 0) {
    errors.add(line_of("snapshot_interval"), "snapshot_interval must be >= 0");
  }

  if (!errors.empty()) errors.raise();
  return c;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  return os.str();
}

}  // namespace

std::string to_text(const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "dimension = " << c.dimension << "\n"
     << "cells = " << join(c.cells) << "\n"
     << "lengths = " << join(c.lengths) << "\n"
     << "n_species = " << c.n_species << "\n"
     << "molar_masses = " << join(c.molar_masses) << "\n"
     << "diffusivities = " << join(c.diffusivities) << "\n";
  if (c.gamma > 0.0) {
    os << "gamma = " << c.gamma << "\n";
  } else {
    os << "epsilon = " << c.epsilon << "\n"
       << "tau = " << c.tau << "\n";
  }
  os << "t_end = " << c.t_end << "\n"
     << "eta0 = " << c.eta0 << "\n"
     << "scenario = " << c.scenario << "\n";
  if (!c.base_composition.empty()) os << "base_composition = " << join(c.base_composition) << "\n";
  if (!c.perturbation.empty()) os << "perturbation = " << join(c.perturbation) << "\n";
  os << "amplitude = " << c.amplitude << "\n";
  if (!c.modes.empty()) os << "modes = " << join(c.modes) << "\n";
  os << "seed = " << c.seed << "\n"
     << "velocity = " << c.velocity << "\n"
     << "velocity_amplitude = " << c.velocity_amplitude << "\n"
     << "newton_tol = " << c.newton_tol << "\n"
     << "fixedpoint_tol = " << c.fixedpoint_tol << "\n"
     << "div_tol = " << c.div_tol << "\n";
  if (!c.output_dir.empty()) os << "output_dir = " << c.output_dir << "\n";
  os << "snapshot_interval = " << c.snapshot_interval << "\n";
  if (c.log_sobolev_constant > 0.0) {
    os << "log_sobolev_constant = " << c.log_sobolev_constant << "\n";
  }
  return os.str();
}

}  // namespace nsms
