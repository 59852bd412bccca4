#pragma once

#include <Eigen/Dense>
#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace modrotor {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Regular dodecahedron at inradius 1, one vertex pair on the z axis.
// Vertices are sorted by (z, x, y) descending, so index 0 is the top vertex
// and index 19 the bottom one. The inscribed cube through the top vertex is
// singled out; its edges are face diagonals of the pentagonal faces and
// generate the connection translations.
struct DodecahedronModel {
  std::array<Vec3, 20> vertices;
  std::vector<std::array<int, 2>> edges;       // 30 pairs, i < j
  std::vector<std::array<int, 5>> faces;       // 12 vertex quintuples, ring order
  std::array<int, 8> cube_vertices;
  std::vector<std::array<int, 2>> cube_edges;  // 12 face diagonals, i < j

  double circumradius = 0.0;
  double edge_length = 0.0;       // pentagon edge
  double cube_edge_length = 0.0;  // face diagonal

  // Columns are the three cube edge directions leaving the top vertex
  // (pointing down), an orthonormal right-handed-up basis for "cube
  // coordinates" in which the cube vertices sit at (+-1/2, +-1/2, +-1/2).
  Mat3 cube_axes;

  Vec3 to_cube(const Vec3& p) const { return cube_axes.transpose() * p / cube_edge_length; }
  Vec3 from_cube(const Vec3& c) const { return cube_edge_length * (cube_axes * c); }
};

DodecahedronModel build_dodecahedron();

struct RotationGroup {
  std::vector<Mat3> rotations;  // 60 proper rotations preserving the vertex set
};

RotationGroup rotation_group(const DodecahedronModel& model);

// The 12 relative positions induced by vertex-pair connections along cube
// edges: each translation is the sum g + h of a cube edge's two vertices.
struct ConnectionSet {
  std::vector<Vec3> translations;
  std::vector<std::array<int, 2>> generating_pairs;

  bool contains(const Vec3& t, double tol = 1e-6) const;
};

ConnectionSet connection_set(const DodecahedronModel& model);

// Unrestricted connection count: rotations x face diagonals.
std::size_t full_connection_count(const DodecahedronModel& model,
                                  const RotationGroup& group);

// Three translations whose cube-coordinate images are (1,1,0), (1,0,1),
// (0,1,1); they generate the position lattice.
struct LatticeBasis {
  Vec3 b1, b2, b3;
  Mat3 B;  // columns b1, b2, b3
};

LatticeBasis lattice_basis(const DodecahedronModel& model, const ConnectionSet& conns);

struct NotInLattice : std::runtime_error {
  explicit NotInLattice(const std::string& what) : std::runtime_error(what) {}
};

Eigen::Vector3i lattice_decompose(const Vec3& v, const LatticeBasis& basis,
                                  double tol = 1e-6);

struct RotorOrientation {
  int index = 0;
  Vec3 direction = Vec3::UnitZ();
  int tilt_class = 0;      // 0..5, ascending tilt angle
  double tilt_deg = 0.0;
};

// One orientation per vertex direction, sorted like the vertices themselves;
// tilt classes come out at 0, 41.81, 70.53, 109.47, 138.19, 180 degrees.
std::vector<RotorOrientation> canonical_orientations(const DodecahedronModel& model);

struct ModulePlacement {
  Eigen::Vector3i lattice_pos = Eigen::Vector3i::Zero();
  int orientation = 0;
  int spin = +1;  // +1 CW, -1 CCW
};

struct DuplicatePosition : std::runtime_error {
  explicit DuplicatePosition(const std::string& what) : std::runtime_error(what) {}
};
struct Disconnected : std::runtime_error {
  explicit Disconnected(const std::string& what) : std::runtime_error(what) {}
};

// module_scale is the physical pentagon edge length; all real-space
// coordinates (positions, translations) are the canonical ones times
// module_scale / canonical edge length.
struct Configuration {
  std::vector<ModulePlacement> placements;
  std::vector<Vec3> centered_positions;  // sum is zero
  Vec3 offset = Vec3::Zero();            // z with p_i = scale*(B x_i) + z
  double module_scale = 1.0;

  std::size_t size() const { return placements.size(); }
};

Configuration make_configuration(const std::vector<ModulePlacement>& placements,
                                 double module_scale = 1.0);

struct ValidityReport {
  bool valid = false;
  std::string diagnostic;
};

ValidityReport is_valid_configuration(const Configuration& config);

bool check_no_overlap(const Configuration& config);

// Raw-position variant used by tests to probe off-lattice placements.
bool check_no_overlap_positions(const DodecahedronModel& model,
                                const std::vector<Vec3>& centers,
                                double module_scale);

// Process-wide singletons of the canonical geometry.
const DodecahedronModel& canonical_model();
const LatticeBasis& canonical_basis();
// The 12 connection translations as integer lattice steps.
const std::vector<Eigen::Vector3i>& lattice_neighbor_steps();

}  // namespace modrotor
