#include <doctest.h>

#include <cmath>

#include "modrotor/dynamics.hpp"
#include "modrotor/fixtures.hpp"

using namespace modrotor;

namespace {

// Module parameters strong enough that every shipped fixture can hover.
ModuleParams test_params() {
  ModuleParams p;
  p.k_th = 30.0;
  p.k_to = 1.5;
  return p;
}

Mat3 skew3(const Vec3& w) {
  Mat3 s;
  s << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return s;
}

}  // namespace

TEST_SUITE("dynamics") {

TEST_CASE("quadrotor actuation columns match a hand assembly") {
  const Configuration& c = fixture("quadrotor").config;
  const ModuleParams params = test_params();
  const VehicleModel m = assemble_vehicle(c, params);
  REQUIRE(m.n == 4);

  // rebuild the expected columns straight from the placements
  const auto& basis = canonical_basis();
  const auto orients = canonical_orientations(canonical_model());
  const double s = c.module_scale / canonical_model().edge_length;
  Vec3 mean = Vec3::Zero();
  for (const auto& p : c.placements) mean += s * (basis.B * p.lattice_pos.cast<double>());
  mean /= double(c.placements.size());

  for (int i = 0; i < m.n; ++i) {
    const auto& pl = c.placements[size_t(i)];
    const Vec3 pos = s * (basis.B * pl.lattice_pos.cast<double>()) - mean;
    const Vec3 d = orients[size_t(pl.orientation)].direction;
    CHECK((m.positions[size_t(i)] - pos).norm() < 1e-12);
    CHECK((m.M_th.col(i) - params.k_th * d).norm() < 1e-12);
    const Vec3 torque = params.k_th * pos.cross(d) + pl.spin * params.k_to * d;
    CHECK((m.M_to.col(i) - torque).norm() < 1e-12);
    CHECK((m.M_tt.col(i).head<3>() - m.M_th.col(i)).norm() == 0.0);
    CHECK((m.M_tt.col(i).tail<3>() - m.M_to.col(i)).norm() == 0.0);
  }
}

TEST_CASE("mass and inertia follow the rigid composition rule") {
  const Configuration& c = fixture("tetra_quad").config;
  const ModuleParams params = test_params();
  const VehicleModel m = assemble_vehicle(c, params);
  CHECK(m.m_total == doctest::Approx(4 * params.m_mdl).epsilon(1e-14));

  Mat3 J = Mat3::Zero();
  for (const auto& p : m.positions)
    J += params.J_mdl +
         params.m_mdl * (p.squaredNorm() * Mat3::Identity() - p * p.transpose());
  CHECK((m.J - J).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((m.J - m.J.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  Eigen::SelfAdjointEigenSolver<Mat3> eig(m.J);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("degrees of freedom per fixture") {
  const ModuleParams params = test_params();
  auto dof = [&](const char* name) {
    return assemble_vehicle(fixture(name).config, params).dof;
  };
  CHECK(dof("quadrotor") == 4);
  CHECK(dof("hexarotor") == 4);
  CHECK(dof("hexarotor_6dof") == 6);
  CHECK(dof("tetra_quad") == 4);
  CHECK(dof("tetra_deca") == 4);
  CHECK(dof("tetra_hexadeca") == 4);
  CHECK(dof("dodeca12_6dof") == 6);
}

TEST_CASE("hover control: equal entries for flat uniform fixtures") {
  const ModuleParams params = test_params();
  const VehicleModel m = assemble_vehicle(fixture("quadrotor").config, params);
  const HoverSolution h = hover_vector(m);
  CHECK((h.t_h - Vec6(0, 0, m.m_total * params.g, 0, 0, 0)).norm() < 1e-12);
  const double expected = m.m_total * params.g / (m.n * params.k_th);
  for (int i = 0; i < m.n; ++i)
    CHECK(h.u_h[i] == doctest::Approx(expected).epsilon(1e-10));
  CHECK((m.M_tt * h.u_h - h.t_h).norm() < 1e-9);
}

TEST_CASE("hover control on a tilted-rotor fixture stays within bounds") {
  const ModuleParams params = test_params();
  const VehicleModel m = assemble_vehicle(fixture("hexarotor_6dof").config, params);
  const HoverSolution h = hover_vector(m);
  CHECK((m.M_tt * h.u_h - h.t_h).norm() < 1e-8);
  CHECK(h.u_h.minCoeff() >= params.u_min);
  CHECK(h.u_h.maxCoeff() <= params.u_max);
}

TEST_CASE("hover infeasible when thrust cannot carry the weight") {
  ModuleParams weak;  // defaults: 10 N per unit against 1.7 kg modules
  const VehicleModel m = assemble_vehicle(fixture("quadrotor").config, weak);
  CHECK_THROWS_AS(hover_vector(m), HoverInfeasible);
}

TEST_CASE("rigid-body derivative conventions") {
  const ModuleParams params = test_params();
  const VehicleModel m = assemble_vehicle(fixture("quadrotor").config, params);
  const HoverSolution h = hover_vector(m);

  RigidState st;
  st.v = Vec3(0.4, -0.1, 0.2);
  st.Omega = Vec3(0.1, -0.2, 0.3);
  const StateDerivative d = dynamics_derivative(st, h.u_h, m);
  CHECK((d.xdot - st.v).norm() == 0.0);
  CHECK((d.Rdot - st.R * skew3(st.Omega)).cwiseAbs().maxCoeff() < 1e-14);

  // at hover with zero rates everything is stationary
  RigidState hover;
  const StateDerivative dh = dynamics_derivative(hover, h.u_h, m);
  CHECK(dh.vdot.norm() < 1e-9);
  CHECK(dh.Omegadot.norm() < 1e-9);
}

TEST_CASE("control bounds are stacked as A u <= b") {
  const VehicleModel m = assemble_vehicle(fixture("quadrotor").config, test_params());
  REQUIRE(m.A.rows() == 2 * m.n);
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(m.n, 0.25);
  CHECK(((m.A * u - m.b).array() <= 0.0).all());
  const Eigen::VectorXd bad = Eigen::VectorXd::Constant(m.n, 1.25);
  CHECK_FALSE(((m.A * bad - m.b).array() <= 0.0).all());
}

}  // TEST_SUITE
