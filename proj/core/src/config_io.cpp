#include "modrotor/config_io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace modrotor {

using ordered_json = nlohmann::ordered_json;

ConfigFile config_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigParseError(e.what());
  }
  ConfigFile c;
  try {
    c.name = j.value("name", std::string{});
    c.note = j.value("note", std::string{});
    c.module_scale = j.value("module_scale", 1.0);
    for (const auto& m : j.at("modules")) {
      ModulePlacement p;
      const auto& pos = m.at("pos");
      if (pos.size() != 3) throw ConfigParseError("pos needs three integers");
      for (int d = 0; d < 3; ++d) {
        if (!pos[static_cast<std::size_t>(d)].is_number_integer())
          throw ConfigParseError("pos needs three integers");
        p.lattice_pos[d] = pos[static_cast<std::size_t>(d)].get<int>();
      }
      p.orientation = m.at("orient").get<int>();
      if (p.orientation < 0 || p.orientation >= 20)
        throw ConfigParseError("orient must index the 20 rotor orientations");
      p.spin = m.at("spin").get<int>();
      if (p.spin != 1 && p.spin != -1) throw ConfigParseError("spin must be 1 or -1");
      c.placements.push_back(p);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigParseError(e.what());
  }
  if (!(c.module_scale > 0.0)) throw ConfigParseError("module_scale must be positive");
  if (c.placements.empty()) throw ConfigParseError("configuration has no modules");
  return c;
}

std::string config_to_json(const ConfigFile& c) {
  ordered_json j;
  if (!c.name.empty()) j["name"] = c.name;
  if (!c.note.empty()) j["note"] = c.note;
  j["module_scale"] = c.module_scale;
  j["modules"] = ordered_json::array();
  for (const auto& p : c.placements) {
    ordered_json m;
    m["pos"] = {p.lattice_pos[0], p.lattice_pos[1], p.lattice_pos[2]};
    m["orient"] = p.orientation;
    m["spin"] = p.spin;
    j["modules"].push_back(std::move(m));
  }
  return j.dump(2) + "\n";
}

ConfigFile load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigParseError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return config_from_json(ss.str());
}

void save_config(const ConfigFile& c, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigParseError("cannot open " + path + " for writing");
  f << config_to_json(c);
  if (!f) throw ConfigParseError("write failed: " + path);
}

}  // namespace modrotor
