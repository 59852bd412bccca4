#pragma once

#include <string>
#include <vector>

#include "modrotor/geometry.hpp"

namespace modrotor {

// Named reference configurations used by the tools and the test suite. The
// lattice layouts are reconstructions of the flown shapes, not measured data.
struct Fixture {
  std::string name;
  std::string note;
  Configuration config;
};

const std::vector<Fixture>& shipped_fixtures();

// Throws std::out_of_range for unknown names.
const Fixture& fixture(const std::string& name);

}  // namespace modrotor
