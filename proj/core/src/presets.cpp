#include "nsms/presets.hpp"

namespace nsms {

const std::vector<Preset>& presets() {
  static const std::vector<Preset> list = {
      {"fick-limit-1d",
       "two species, equal masses; reduces to the heat equation",
       R"(dimension = 1
cells = 256
lengths = 1
n_species = 2
molar_masses = 1, 1
diffusivities = 0.1
epsilon = 0
tau = 1e-4
t_end = 1
scenario = cosine
base_composition = 0.5, 0.5
perturbation = 1, -1
amplitude = 0.1
modes = 1
newton_tol = 1e-12
snapshot_interval = 1000
)"},
      {"three-species-1d",
       "three species with unequal masses and diffusivities; exponential decay",
       R"(dimension = 1
cells = 128
lengths = 1
n_species = 3
molar_masses = 1, 2, 3
diffusivities = 0.2, 0.5, 1.0
epsilon = 0
tau = 1e-3
t_end = 10
scenario = random
base_composition = 0.3, 0.3, 0.4
amplitude = 0.1
modes = 1
seed = 7
snapshot_interval = 1000
)"},
      {"two-species-2d-vortex",
       "two species stirred by a decaying vortex on the unit square",
       R"(dimension = 2
cells = 64, 64
lengths = 1, 1
n_species = 2
molar_masses = 1, 2
diffusivities = 0.05
epsilon = 0
tau = 1e-3
t_end = 0.05
scenario = cosine
base_composition = 0.5, 0.5
perturbation = 1, -1
amplitude = 0.2
modes = 1, 0
velocity = vortex
velocity_amplitude = 1
snapshot_interval = 10
)"},
      {"paper-schedule",
       "three species, epsilon and tau derived from gamma",
       R"(dimension = 1
cells = 64
lengths = 1
n_species = 3
molar_masses = 1, 2, 3
diffusivities = 0.2, 0.5, 1.0
gamma = 1e-3
t_end = 2
scenario = random
base_composition = 0.3, 0.3, 0.4
amplitude = 0.1
modes = 3
seed = 7
)"},
  };
  return list;
}

const Preset* find_preset(const std::string& name) {
  for (const auto& p : presets()) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

}  // namespace nsms
