#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "modrotor/allocation.hpp"
#include "modrotor/fixtures.hpp"

using namespace modrotor;

namespace {

ModuleParams test_params() {
  ModuleParams p;
  p.k_th = 30.0;
  p.k_to = 1.5;
  return p;
}

VehicleModel vehicle(const char* name) {
  return assemble_vehicle(fixture(name).config, test_params());
}

}  // namespace

TEST_SUITE("allocation") {

TEST_CASE("pseudo-inverse allocation is proper") {
  const VehicleModel m = vehicle("quadrotor");
  const AllocationMatrix a = pseudo_inverse_allocation(m);
  CHECK((m.M_tt * a.C - a.H).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((a.C * a.H - a.C).cwiseAbs().maxCoeff() < 1e-10);
  // H is the orthogonal projector onto the reachable wrench space
  CHECK((a.H - a.H.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.H * a.H - a.H).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((a.H * m.M_tt - m.M_tt).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("authority program on the quadrotor: tight inscribed ball") {
  const VehicleModel m = vehicle("quadrotor");
  const HoverSolution h = hover_vector(m);
  const EllipseSpec e = ellipse_from(projector(m.M_tt));
  const AuthorityResult res = max_authority_allocation(m, h.u_h, e);
  REQUIRE(res.radius > 0.0);

  // closed-form radius of the same C agrees with the program value
  const SubspaceRadius fixed = authority_radius(m, res.alloc, h.u_h, e.Q);
  CHECK(fixed.radius == doctest::Approx(res.radius).epsilon(1e-6));

  // ellipse boundary sampling: feasible just inside, binding direction
  // violates just outside
  Eigen::SelfAdjointEigenSolver<Mat6> eig(e.Q);
  Mat6 root = Mat6::Zero();
  for (int i = 0; i < 6; ++i)
    if (eig.eigenvalues()[i] > 1e-10)
      root += std::sqrt(eig.eigenvalues()[i]) * eig.eigenvectors().col(i) *
              eig.eigenvectors().col(i).transpose();
  std::mt19937 rng(123);
  std::normal_distribution<double> gauss;
  for (int k = 0; k < 200; ++k) {
    Vec6 d;
    for (int i = 0; i < 6; ++i) d[i] = gauss(rng);
    Vec6 t = root * d;
    const double nq = std::sqrt(t.dot(e.Q * t));
    if (nq < 1e-9) continue;
    t *= res.radius * (1.0 - 1e-6) / nq;
    const Eigen::VectorXd u = h.u_h + res.alloc.C * (e.S * t);
    CHECK(((m.A * u - m.b).array() <= 1e-6).all());
  }
  const Eigen::VectorXd u_out =
      h.u_h + res.alloc.C * (e.S * ((1.0 + 1e-3) * res.binding_direction));
  CHECK((m.A * u_out - m.b).maxCoeff() > 0.0);
}

TEST_CASE("authority with hover pinned to the bound is rejected") {
  const VehicleModel m = vehicle("quadrotor");
  const Eigen::VectorXd at_limit = Eigen::VectorXd::Ones(m.n);
  CHECK_THROWS_AS(
      max_authority_allocation(m, at_limit, ellipse_from(projector(m.M_tt))),
      HoverNotInterior);
}

TEST_CASE("authority radius degenerates on an unreachable subspace") {
  const VehicleModel m = vehicle("quadrotor");
  const AllocationMatrix a = pseudo_inverse_allocation(m);
  Mat6 lateral = Mat6::Zero();
  lateral(0, 0) = 1.0;  // x force is unreachable for a flat quad
  const SubspaceRadius r = authority_radius(m, a, lateral);
  CHECK(r.degenerate);
}

TEST_CASE("commanded-space polytope membership matches its definition") {
  const VehicleModel m = vehicle("quadrotor");
  const HoverSolution h = hover_vector(m);
  const AllocationMatrix a = pseudo_inverse_allocation(m);
  const ReachableUnder r = reachable_under(m, a, h.u_h);
  CHECK(r.member(Vec6::Zero()));

  std::mt19937 rng(5);
  std::normal_distribution<double> gauss;
  for (int k = 0; k < 500; ++k) {
    Vec6 t;
    for (int i = 0; i < 6; ++i) t[i] = 20.0 * gauss(rng);
    const Eigen::VectorXd u = h.u_h + a.C * t;
    const bool feasible = ((m.A * u - m.b).array() <= 1e-12).all();
    CHECK(r.member(t, 1e-9) == feasible);
  }
}

TEST_CASE("global zonotope: cloud membership and hull support") {
  const VehicleModel m = vehicle("quadrotor");
  const ReachableGlobal hull = reachable_global(m, {2, 3, 4});
  REQUIRE(hull.rank == 3);

  for (Eigen::Index i = 0; i < hull.vertex_cloud.cols(); ++i)
    CHECK(hull.member(hull.vertex_cloud.col(i), 1e-7));
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    Eigen::VectorXd u(m.n);
    for (int i = 0; i < m.n; ++i) u[i] = unif(rng);
    const Eigen::VectorXd w = m.M_tt * u;
    const Eigen::Vector3d pt(w[2], w[3], w[4]);
    CHECK(hull.member(pt, 1e-7));
  }
  // points pushed past a facet are excluded
  for (Eigen::Index f = 0; f < hull.facet_normals.cols(); ++f) {
    const Eigen::Vector3d n = hull.facet_normals.col(f);
    const Eigen::Vector3d pt = hull.center + (hull.facet_offsets[f] - n.dot(hull.center) + 1e-3) * n;
    CHECK_FALSE(hull.member(pt + 1e-2 * n, 1e-9));
  }
}

TEST_CASE("rank-deficient wrench projections stay flat but answer membership") {
  const VehicleModel m = vehicle("quadrotor");
  const ReachableGlobal line = reachable_global(m, {0, 1, 2});  // thrust is vertical only
  CHECK(line.rank == 1);
  CHECK(line.member(line.center, 1e-7));
  Eigen::Vector3d g = Eigen::Vector3d::Zero();
  for (Eigen::Index i = 0; i < line.generators.cols(); ++i) g += line.generators.col(i);
  CHECK(line.member(line.center + g, 1e-6));
  CHECK_FALSE(line.member(line.center + 2.0 * g + Eigen::Vector3d(1e-3, 0, 0), 1e-9));
}

TEST_CASE("zonotope hull mesh satisfies the Euler relation") {
  const VehicleModel m = vehicle("octorotor");
  const ReachableGlobal hull = reachable_global(m, {2, 3, 4});
  REQUIRE(hull.rank == 3);
  const std::string off = to_off(hull);
  std::istringstream is(off);
  std::string tag;
  int V = 0, F = 0, E = 0;
  is >> tag >> V >> F >> E;
  REQUIRE(tag == "OFF");
  // count edges from the face cycles
  for (int i = 0; i < V; ++i) {
    double x, y, z;
    is >> x >> y >> z;
  }
  int edge_slots = 0;
  for (int f = 0; f < F; ++f) {
    int k;
    is >> k;
    edge_slots += k;
    for (int j = 0; j < k; ++j) {
      int idx;
      is >> idx;
      REQUIRE(idx >= 0);
      REQUIRE(idx < V);
    }
  }
  CHECK(V - edge_slots / 2 + F == 2);
}

TEST_CASE("sixteen modules is the hull enumeration limit") {
  std::vector<ModulePlacement> chain;
  for (int i = 0; i < 17; ++i)
    chain.push_back({Eigen::Vector3i(i, 0, 0), 0, i % 2 ? -1 : +1});
  const VehicleModel m =
      assemble_vehicle(make_configuration(chain, 0.3), test_params());
  CHECK_THROWS_AS(reachable_global(m, {2, 3, 4}), TooManyModules);
}

TEST_CASE("command scaling walks toward the boundary and stops there") {
  const VehicleModel m = vehicle("quadrotor");
  const HoverSolution h = hover_vector(m);
  const AllocationMatrix a = pseudo_inverse_allocation(m);

  const AllocateResult keep = allocate(a, h.t_h, m, h.u_h, h.t_h);
  CHECK(keep.alpha == doctest::Approx(1.0));
  CHECK((keep.u - h.u_h).norm() < 1e-12);

  Vec6 huge = h.t_h;
  huge[5] += 1e4;  // absurd yaw demand
  const AllocateResult clipped = allocate(a, huge, m, h.u_h, h.t_h);
  CHECK(clipped.alpha < 1.0);
  CHECK(((m.A * clipped.u - m.b).array() <= 1e-9).all());
  const Eigen::VectorXd expect =
      h.u_h + clipped.alpha * (a.C * (huge - h.t_h));
  CHECK((clipped.u - expect).norm() < 1e-9);
}

}  // TEST_SUITE
