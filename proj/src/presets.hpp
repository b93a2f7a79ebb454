#pragma once

// Scripted reproductions of the known attacks, each paired with the query it
// falsifies.

#include <stdexcept>
#include <string>
#include <vector>

#include "scheduler.hpp"

namespace mtpsim {

class UnknownPreset : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PresetInfo {
  std::string name;
  std::string description;
  std::string query;  // built-in query name, possibly with a ~label removal
  bool expect_violated = true;
};

const std::vector<PresetInfo>& presets();
const PresetInfo& preset_info(const std::string& name);
Scenario preset_attack(const std::string& name);

}  // namespace mtpsim
