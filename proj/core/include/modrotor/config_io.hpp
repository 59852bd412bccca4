#pragma once

#include <string>
#include <vector>

#include "modrotor/geometry.hpp"

namespace modrotor {

// On-disk configuration: lattice placements plus the physical edge length.
// Optional name/note strings survive a load/save round trip; files written
// by save_config are byte-stable under reload.
struct ConfigFile {
  std::string name;  // empty = omitted from the file
  std::string note;
  double module_scale = 1.0;
  std::vector<ModulePlacement> placements;

  Configuration build() const { return make_configuration(placements, module_scale); }
};

struct ConfigParseError : std::runtime_error {
  explicit ConfigParseError(const std::string& what) : std::runtime_error(what) {}
};

ConfigFile config_from_json(const std::string& text);
std::string config_to_json(const ConfigFile& c);

ConfigFile load_config(const std::string& path);
void save_config(const ConfigFile& c, const std::string& path);

}  // namespace modrotor
