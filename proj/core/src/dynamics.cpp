#include "modrotor/dynamics.hpp"

#include <cmath>

#include "modrotor/socp.hpp"

namespace modrotor {

namespace {

Mat3 skew(const Vec3& w) {
  Mat3 S;
  S << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return S;
}

}  // namespace

VehicleModel assemble_vehicle(const Configuration& config,
                              const ModuleParams& params) {
  const auto rep = is_valid_configuration(config);
  if (!rep.valid) throw InvalidConfiguration(rep.diagnostic);

  static const auto orientations = canonical_orientations(build_dodecahedron());

  VehicleModel m;
  m.n = static_cast<int>(config.size());
  m.params = params;
  m.m_total = params.m_mdl * m.n;
  m.M_th.resize(3, m.n);
  m.M_to.resize(3, m.n);
  m.M_tt.resize(6, m.n);
  m.positions = config.centered_positions;

  for (int i = 0; i < m.n; ++i) {
    const Vec3 p = config.centered_positions[i];
    const Vec3 eta = orientations[config.placements[i].orientation].direction;
    const double eps = config.placements[i].spin;
    m.directions.push_back(eta);
    m.spins.push_back(config.placements[i].spin);

    m.J += params.J_mdl +
           params.m_mdl * (p.squaredNorm() * Mat3::Identity() - p * p.transpose());

    m.M_th.col(i) = params.k_th * eta;
    m.M_to.col(i) = params.k_to * eps * eta + params.k_th * p.cross(eta);
  }
  m.M_tt.topRows(3) = m.M_th;
  m.M_tt.bottomRows(3) = m.M_to;

  m.A.setZero(2 * m.n, m.n);
  m.b.resize(2 * m.n);
  for (int i = 0; i < m.n; ++i) {
    m.A(i, i) = 1.0;
    m.b[i] = params.u_max;
    m.A(m.n + i, i) = -1.0;
    m.b[m.n + i] = -params.u_min;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m.M_tt);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv[0] : 0.0;
  m.dof = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-8 * (smax > 0 ? smax : 1.0)) ++m.dof;
  return m;
}

StateDerivative dynamics_derivative(const RigidState& state,
                                    const Eigen::VectorXd& u,
                                    const VehicleModel& m) {
  StateDerivative d;
  const Vec3 G(0, 0, -m.params.g);
  d.xdot = state.v;
  d.vdot = (state.R * (m.M_th * u)) / m.m_total + G;
  d.Rdot = state.R * skew(state.Omega);
  d.Omegadot = m.J.ldlt().solve(-state.Omega.cross(m.J * state.Omega) +
                                m.M_to * u);
  return d;
}

HoverSolution hover_vector(const VehicleModel& m) {
  HoverSolution h;
  h.t_h.setZero();
  h.t_h[2] = m.m_total * m.params.g;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m.M_tt,
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd u_pinv = svd.solve(h.t_h);
  if ((m.M_tt * u_pinv - h.t_h).norm() > 1e-9 * h.t_h.norm())
    throw HoverInfeasible("hover wrench is outside the actuation range");

  const double lo = m.params.u_min, hi = m.params.u_max;
  auto in_bounds = [&](const Eigen::VectorXd& u) {
    return (u.array() >= lo - 1e-12).all() && (u.array() <= hi + 1e-12).all();
  };
  if (in_bounds(u_pinv)) {
    h.u_h = u_pinv;
    return h;
  }

  // min ||u - u_pinv||_inf  s.t.  M_tt u = t_h,  lo <= u <= hi
  SocpProblem p;
  const int n = m.n;
  p.num_vars = n + 1;
  p.objective = Eigen::VectorXd::Zero(n + 1);
  p.objective[n] = 1.0;
  for (int r = 0; r < 6; ++r) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n + 1);
    a.head(n) = m.M_tt.row(r).transpose();
    p.add_eq(a, h.t_h[r]);
  }
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd up = Eigen::VectorXd::Zero(n + 1);
    up[i] = -1.0;
    up[n] = 1.0;  // s - (u_i - u_pinv_i) >= 0
    p.add_linear(up, u_pinv[i]);
    Eigen::VectorXd dn = Eigen::VectorXd::Zero(n + 1);
    dn[i] = 1.0;
    dn[n] = 1.0;  // s + (u_i - u_pinv_i) >= 0
    p.add_linear(dn, -u_pinv[i]);
    Eigen::VectorXd bl = Eigen::VectorXd::Zero(n + 1);
    bl[i] = 1.0;
    p.add_linear(bl, -lo);
    Eigen::VectorXd bu = Eigen::VectorXd::Zero(n + 1);
    bu[i] = -1.0;
    p.add_linear(bu, hi);
  }
  const SocpSolution s = solve(p, 1e-9);
  if (s.status != SocpStatus::Optimal || !in_bounds(s.x.head(n)) ||
      (m.M_tt * s.x.head(n) - h.t_h).norm() > 1e-7 * (1.0 + h.t_h.norm()))
    throw HoverInfeasible("no admissible control reaches the hover wrench");
  h.u_h = s.x.head(n);
  return h;
}

}  // namespace modrotor
