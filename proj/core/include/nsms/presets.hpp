#pragma once

// Built-in run configurations.

#include <string>
#include <vector>

namespace nsms {

struct Preset {
  std::string name;
  std::string description;
  std::string text;  // config file contents
};

const std::vector<Preset>& presets();

/// nullptr when no preset has this name.
const Preset* find_preset(const std::string& name);

}  // namespace nsms
