#include "modrotor/fixtures.hpp"

#include <stdexcept>

namespace modrotor {

namespace {

constexpr double kFixtureScale = 0.3;  // metres per pentagon edge

// Layouts are easiest to state in cube coordinates: connections step by the
// twelve vectors with two nonzero entries of +-1, and the world vertical is
// the cube (1,1,1) direction.
Eigen::Vector3i lattice_from_cube(const Vec3& cube) {
  return lattice_decompose(canonical_model().from_cube(cube), canonical_basis());
}

struct CubePlacement {
  Vec3 cube;
  int orientation = 0;
  int spin = +1;
};

Configuration build(const std::vector<CubePlacement>& modules) {
  std::vector<ModulePlacement> placements;
  placements.reserve(modules.size());
  for (const auto& m : modules)
    placements.push_back({lattice_from_cube(m.cube), m.orientation, m.spin});
  return make_configuration(placements, kFixtureScale);
}

// In-plane steps (perpendicular to the vertical) and downward steps.
const Vec3 A(1, -1, 0), B(0, 1, -1);          // triangular lattice of one layer
const Vec3 U(1, 1, 0), V(1, 0, 1), W(0, 1, 1);  // descend to the three positions below

std::vector<Fixture> make_fixtures() {
  std::vector<Fixture> out;

  out.push_back({"quadrotor",
                 "flat 2x2 block, alternating spins",
                 build({{Vec3(0, 0, 0), 0, +1},
                        {A, 0, -1},
                        {B, 0, -1},
                        {A + B, 0, +1}})});

  // Ring of the six in-plane neighbours of an empty centre.
  const std::vector<Vec3> ring = {A, A + B, B, -A, -A - B, -B};
  {
    std::vector<CubePlacement> ms;
    for (std::size_t i = 0; i < ring.size(); ++i)
      ms.push_back({ring[i], 0, i % 2 == 0 ? +1 : -1});
    out.push_back({"hexarotor", "flat ring of six, alternating spins", build(ms)});
  }
  {
    std::vector<CubePlacement> ms;
    const int tilted[6] = {1, 2, 3, 1, 2, 3};  // first tilt class, cycled
    for (std::size_t i = 0; i < ring.size(); ++i)
      ms.push_back({ring[i], tilted[i], i % 2 == 0 ? +1 : -1});
    out.push_back({"hexarotor_6dof",
                   "ring of six with cycled first-tilt-class rotors; full rank",
                   build(ms)});
  }

  out.push_back({"tetra_quad",
                 "tetrahedron: apex above a triangle of three",
                 build({{Vec3(0, 0, 0), 0, +1},
                        {-U, 0, -1},
                        {-V, 0, +1},
                        {-W, 0, -1}})});

  {
    // Three-layer tetrahedron: 1 + 3 + 6 positions.
    std::vector<Vec3> cells = {Vec3(0, 0, 0), -U, -V, -W,
                               -2 * U, -2 * V, -2 * W, -U - V, -U - W, -V - W};
    std::vector<CubePlacement> ms;
    for (std::size_t i = 0; i < cells.size(); ++i)
      ms.push_back({cells[i], 0, i % 2 == 0 ? +1 : -1});
    out.push_back({"tetra_deca", "three-layer tetrahedron of ten", build(ms)});
  }
  {
    // Four tetra_quad blocks stacked into the next tetrahedron generation.
    std::vector<Vec3> cells;
    const std::vector<Vec3> apexes = {Vec3(0, 0, 0), -2 * U, -2 * V, -2 * W};
    for (const Vec3& apex : apexes)
      for (const Vec3& d : {Vec3(0, 0, 0), U, V, W}) cells.push_back(apex - d);
    std::vector<CubePlacement> ms;
    for (std::size_t i = 0; i < cells.size(); ++i)
      ms.push_back({cells[i], 0, i % 2 == 0 ? +1 : -1});
    out.push_back({"tetra_hexadeca",
                   "four-layer tetrahedron built from four tetra_quad blocks",
                   build(ms)});
  }
  {
    std::vector<CubePlacement> ms;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        ms.push_back({i * A + j * B, 0, (i + j) % 2 == 0 ? +1 : -1});
    out.push_back({"array16", "flat 4x4 array, checkerboard spins", build(ms)});
  }
  {
    std::vector<CubePlacement> ms;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 2; ++j)
        ms.push_back({i * A + j * B, 0, (i + j) % 2 == 0 ? +1 : -1});
    out.push_back({"octorotor", "flat 4x2 array, checkerboard spins", build(ms)});
  }
  {
    // Perimeter of the radius-two hexagon: twelve modules, tilt pattern
    // cycling through the three first-class directions to reach full rank.
    const std::vector<Vec3> corners = {2 * A, 2 * (A + B), 2 * B,
                                       -2 * A, -2 * (A + B), -2 * B};
    std::vector<Vec3> cells;
    for (std::size_t i = 0; i < 6; ++i) {
      cells.push_back(corners[i]);
      cells.push_back((corners[i] + corners[(i + 1) % 6]) / 2);
    }
    const int tilted[12] = {0, 1, 0, 2, 0, 3, 0, 1, 0, 2, 0, 3};
    std::vector<CubePlacement> ms;
    for (std::size_t i = 0; i < cells.size(); ++i)
      ms.push_back({cells[i], tilted[i], i % 2 == 0 ? +1 : -1});
    out.push_back({"dodeca12_6dof",
                   "hexagonal ring of twelve with mixed tilts; full-rank stand-in",
                   build(ms)});
  }
  return out;
}

}  // namespace

const std::vector<Fixture>& shipped_fixtures() {
  static const std::vector<Fixture> fixtures = make_fixtures();
  return fixtures;
}

const Fixture& fixture(const std::string& name) {
  for (const auto& f : shipped_fixtures())
    if (f.name == name) return f;
  throw std::out_of_range("no fixture named " + name);
}

}  // namespace modrotor
