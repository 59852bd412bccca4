#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "modrotor/config_io.hpp"
#include "modrotor/fixtures.hpp"

using namespace modrotor;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("shipped fixtures are valid and carry unique names") {
  const auto& all = shipped_fixtures();
  CHECK(all.size() >= 7);
  std::set<std::string> names;
  for (const Fixture& fx : all) {
    CHECK_FALSE(fx.name.empty());
    names.insert(fx.name);
    const ValidityReport rep = is_valid_configuration(fx.config);
    const std::string why = fx.name + ": " + rep.diagnostic;
    CHECK_MESSAGE(rep.valid, why);
  }
  CHECK(names.size() == all.size());
  CHECK(fixture("quadrotor").config.size() == 4);
  CHECK_THROWS_AS(fixture("no_such_fixture"), std::out_of_range);
}

TEST_CASE("save then load then save is byte-identical") {
  for (const Fixture& fx : shipped_fixtures()) {
    const ConfigFile cf{fx.name, fx.note, fx.config.module_scale,
                        fx.config.placements};
    const std::string path = std::string("roundtrip_") + fx.name + ".json";
    save_config(cf, path);
    const std::string first = slurp(path);
    const ConfigFile back = load_config(path);
    save_config(back, path);
    CHECK_MESSAGE(slurp(path) == first, fx.name);
    CHECK(back.module_scale == cf.module_scale);
    CHECK(back.placements.size() == cf.placements.size());
    std::remove(path.c_str());
  }
}

TEST_CASE("json text survives a parse/serialize cycle") {
  const Fixture& fx = fixture("tetra_deca");
  const std::string text = config_to_json(
      ConfigFile{fx.name, fx.note, fx.config.module_scale, fx.config.placements});
  const ConfigFile parsed = config_from_json(text);
  CHECK(config_to_json(parsed) == text);
}

TEST_CASE("malformed configuration files are rejected with context") {
  CHECK_THROWS_AS(config_from_json("{not json"), ConfigParseError);
  CHECK_THROWS_AS(config_from_json("{}"), ConfigParseError);  // no modules
  CHECK_THROWS_AS(config_from_json(R"({"modules": []})"), ConfigParseError);
  CHECK_THROWS_AS(config_from_json(
                      R"({"modules": [{"pos": [0, 0], "orient": 0, "spin": 1}]})"),
                  ConfigParseError);
  CHECK_THROWS_AS(config_from_json(
                      R"({"modules": [{"pos": [0, 0, 0], "orient": 25, "spin": 1}]})"),
                  ConfigParseError);
  CHECK_THROWS_AS(config_from_json(
                      R"({"modules": [{"pos": [0, 0, 0], "orient": 0, "spin": 2}]})"),
                  ConfigParseError);
  CHECK_THROWS_AS(config_from_json(
                      R"({"module_scale": -1, "modules": [{"pos": [0,0,0], "orient": 0, "spin": 1}]})"),
                  ConfigParseError);
  CHECK_THROWS_AS(config_from_json(
                      R"({"modules": [{"pos": [0.5, 0, 0], "orient": 0, "spin": 1}]})"),
                  ConfigParseError);
  CHECK_THROWS_AS(load_config("definitely_missing.json"), ConfigParseError);
}

TEST_CASE("geometric validation happens at build time, not parse time") {
  const ConfigFile overlap = config_from_json(
      R"({"modules": [{"pos": [0,0,0], "orient": 0, "spin": 1},
                      {"pos": [0,0,0], "orient": 0, "spin": -1}]})");
  CHECK_THROWS_AS(overlap.build(), DuplicatePosition);

  const ConfigFile apart = config_from_json(
      R"({"modules": [{"pos": [0,0,0], "orient": 0, "spin": 1},
                      {"pos": [5,5,5], "orient": 0, "spin": -1}]})");
  CHECK_THROWS_AS(apart.build(), Disconnected);
}

}  // TEST_SUITE
