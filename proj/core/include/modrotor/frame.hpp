#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "modrotor/geometry.hpp"

namespace modrotor {

// Thick-walled circular tube, uniform for every member.
struct BeamSection {
  double E = 70e9;        // Pa
  double nu = 0.3;
  double r_out = 5e-3;    // m
  double r_in = 4e-3;     // m

  double shear_modulus() const { return E / (2.0 * (1.0 + nu)); }
  double area() const;
  double bending_inertia() const;   // I_y = I_z for a circular tube
  double torsion_constant() const;  // polar J
};

struct SpaceFrame {
  Eigen::Matrix3Xd joints;                  // deduplicated positions
  std::vector<std::array<int, 2>> members;  // joint index pairs
  std::vector<int> member_module;           // owning module per member
  double member_length = 0.0;

  int num_joints() const { return static_cast<int>(joints.cols()); }
  int num_members() const { return static_cast<int>(members.size()); }
};

SpaceFrame build_frame(const Configuration& c, double module_scale);
SpaceFrame build_frame(const Configuration& c);

struct ZeroLengthMember : std::runtime_error {
  explicit ZeroLengthMember(const std::string& what) : std::runtime_error(what) {}
};
struct UnbalancedLoad : std::runtime_error {
  explicit UnbalancedLoad(const std::string& what) : std::runtime_error(what) {}
};
struct SingularStiffness : std::runtime_error {
  explicit SingularStiffness(const std::string& what) : std::runtime_error(what) {}
};

struct StiffnessSystem {
  Eigen::MatrixXd K;       // 6 n_jt square elastic stiffness
  Eigen::MatrixXd K_mb;    // 6 n_mb x 6 n_jt member stiffness (far-end rows, local frame)
  Eigen::MatrixXd H_rb;    // 6 x 6 n_jt orthonormal rigid-body modes
  Eigen::MatrixXd K_pinv;  // pseudo-inverse of K
  SpaceFrame frame;
  BeamSection section;
};

StiffnessSystem assemble_stiffness(const SpaceFrame& f, const BeamSection& s);

// Load vectors stack (force, moment) per joint; a balanced load does no work
// against any rigid-body mode.
bool is_balanced(const StiffnessSystem& sys, const Eigen::VectorXd& P, double tol = 1e-9);
Eigen::VectorXd solve_displacements(const StiffnessSystem& sys, const Eigen::VectorXd& P);

// Per member: axial force, two shear forces, torsional moment, two bending
// moments, in the member's local frame (axial first).
using MemberLoad = Eigen::Matrix<double, 6, 1>;
std::vector<MemberLoad> member_loads(const StiffnessSystem& sys, const Eigen::VectorXd& v);

struct ComplianceResult {
  double sigma1 = 0.0;
  Eigen::VectorXd worst_force;  // force-only balanced load, unit force norm
};
ComplianceResult max_compliance(const StiffnessSystem& sys);

struct AxialLoadResult {
  double sigma2 = 0.0;
  int argmax_member = -1;
};
AxialLoadResult max_axial_load(const StiffnessSystem& sys);

int layer_count(const Configuration& c);

}  // namespace modrotor
