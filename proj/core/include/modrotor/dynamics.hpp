#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "modrotor/geometry.hpp"

namespace modrotor {

using Vec6 = Eigen::Matrix<double, 6, 1>;

struct ModuleParams {
  double m_mdl = 1.7;                  // kg, per module
  Mat3 J_mdl = 0.05 * Mat3::Identity();  // kg m^2
  double k_th = 10.0;                  // N per unit control
  double k_to = 0.5;                   // N m per unit control
  double u_min = 0.0;
  double u_max = 1.0;
  double g = 9.81;
};

struct VehicleModel {
  int n = 0;
  double m_total = 0.0;
  Mat3 J = Mat3::Zero();
  Eigen::Matrix3Xd M_th;   // 3 x n
  Eigen::Matrix3Xd M_to;   // 3 x n
  Eigen::MatrixXd M_tt;    // 6 x n
  Eigen::MatrixXd A;       // 2n x n box rows: u <= u_max, -u <= -u_min
  Eigen::VectorXd b;       // 2n
  int dof = 0;
  ModuleParams params;
  std::vector<Vec3> positions;    // centered, physical units
  std::vector<Vec3> directions;   // unit rotor axes
  std::vector<int> spins;
};

struct InvalidConfiguration : std::runtime_error {
  explicit InvalidConfiguration(const std::string& what) : std::runtime_error(what) {}
};
struct HoverInfeasible : std::runtime_error {
  explicit HoverInfeasible(const std::string& what) : std::runtime_error(what) {}
};

VehicleModel assemble_vehicle(const Configuration& config, const ModuleParams& params);

struct RigidState {
  Vec3 x = Vec3::Zero();
  Mat3 R = Mat3::Identity();
  Vec3 v = Vec3::Zero();
  Vec3 Omega = Vec3::Zero();
};

struct StateDerivative {
  Vec3 xdot;
  Mat3 Rdot;
  Vec3 vdot;
  Vec3 Omegadot;
};

StateDerivative dynamics_derivative(const RigidState& state,
                                    const Eigen::VectorXd& u,
                                    const VehicleModel& m);

struct HoverSolution {
  Vec6 t_h;
  Eigen::VectorXd u_h;
};

// t_h = (0,0,m g,0,0,0); u_h is the pseudo-inverse control, with a small
// LP fallback (min-infinity-norm deviation) before declaring infeasibility.
HoverSolution hover_vector(const VehicleModel& m);

}  // namespace modrotor
