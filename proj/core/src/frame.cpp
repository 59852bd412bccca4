#include "modrotor/frame.hpp"

#include <cmath>
#include <map>
#include <numbers>

namespace modrotor {

double BeamSection::area() const {
  return std::numbers::pi * (r_out * r_out - r_in * r_in);
}

double BeamSection::bending_inertia() const {
  return std::numbers::pi / 4.0 *
         (std::pow(r_out, 4) - std::pow(r_in, 4));
}

double BeamSection::torsion_constant() const { return 2.0 * bending_inertia(); }

SpaceFrame build_frame(const Configuration& c, double module_scale) {
  const DodecahedronModel& model = canonical_model();
  const double vert_scale = module_scale / model.edge_length;
  const double center_scale = module_scale / c.module_scale;
  const double merge_tol = 1e-6 * module_scale;

  SpaceFrame f;
  std::vector<Eigen::Vector3d> joints;
  std::vector<std::vector<int>> module_joint_ids(c.placements.size());

  auto joint_id = [&](const Eigen::Vector3d& p) {
    for (std::size_t i = 0; i < joints.size(); ++i)
      if ((joints[i] - p).norm() < merge_tol) return static_cast<int>(i);
    joints.push_back(p);
    return static_cast<int>(joints.size() - 1);
  };

  for (std::size_t mi = 0; mi < c.placements.size(); ++mi) {
    const Eigen::Vector3d center = center_scale * c.centered_positions[mi];
    module_joint_ids[mi].reserve(20);
    for (const auto& v : model.vertices)
      module_joint_ids[mi].push_back(joint_id(center + vert_scale * v));
    for (const auto& e : model.edges) {
      f.members.push_back({module_joint_ids[mi][e[0]], module_joint_ids[mi][e[1]]});
      f.member_module.push_back(static_cast<int>(mi));
    }
  }

  f.joints.resize(3, static_cast<Eigen::Index>(joints.size()));
  for (std::size_t i = 0; i < joints.size(); ++i)
    f.joints.col(static_cast<Eigen::Index>(i)) = joints[i];
  f.member_length = module_scale;
  return f;
}

SpaceFrame build_frame(const Configuration& c) { return build_frame(c, c.module_scale); }

namespace {

// 12x12 two-node beam element in local coordinates; dof order per node is
// (ux, uy, uz, rx, ry, rz) with x axial.
Eigen::Matrix<double, 12, 12> local_beam(const BeamSection& s, double L) {
  Eigen::Matrix<double, 12, 12> k = Eigen::Matrix<double, 12, 12>::Zero();
  const double EA = s.E * s.area();
  const double GJ = s.shear_modulus() * s.torsion_constant();
  const double EI = s.E * s.bending_inertia();
  const double L2 = L * L, L3 = L2 * L;

  k(0, 0) = k(6, 6) = EA / L;
  k(0, 6) = k(6, 0) = -EA / L;
  k(3, 3) = k(9, 9) = GJ / L;
  k(3, 9) = k(9, 3) = -GJ / L;

  // bending in the x-y plane (rotation about z): dofs 1, 5, 7, 11
  {
    const int d[4] = {1, 5, 7, 11};
    const double m[4][4] = {
        {12 * EI / L3, 6 * EI / L2, -12 * EI / L3, 6 * EI / L2},
        {6 * EI / L2, 4 * EI / L, -6 * EI / L2, 2 * EI / L},
        {-12 * EI / L3, -6 * EI / L2, 12 * EI / L3, -6 * EI / L2},
        {6 * EI / L2, 2 * EI / L, -6 * EI / L2, 4 * EI / L}};
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) k(d[a], d[b]) = m[a][b];
  }
  // bending in the x-z plane (rotation about y): dofs 2, 4, 8, 10
  {
    const int d[4] = {2, 4, 8, 10};
    const double m[4][4] = {
        {12 * EI / L3, -6 * EI / L2, -12 * EI / L3, -6 * EI / L2},
        {-6 * EI / L2, 4 * EI / L, 6 * EI / L2, 2 * EI / L},
        {-12 * EI / L3, 6 * EI / L2, 12 * EI / L3, 6 * EI / L2},
        {-6 * EI / L2, 2 * EI / L, 6 * EI / L2, 4 * EI / L}};
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) k(d[a], d[b]) = m[a][b];
  }
  return k;
}

Eigen::Matrix3d member_axes(const Eigen::Vector3d& from, const Eigen::Vector3d& to) {
  const Eigen::Vector3d x = (to - from).normalized();
  Eigen::Vector3d y = Eigen::Vector3d::UnitZ().cross(x);
  if (y.norm() < 1e-6) y = Eigen::Vector3d::UnitX();  // vertical member
  y.normalize();
  const Eigen::Vector3d z = x.cross(y);
  Eigen::Matrix3d R;  // rows map global to local
  R.row(0) = x;
  R.row(1) = y;
  R.row(2) = z.normalized();
  return R;
}

}  // namespace

StiffnessSystem assemble_stiffness(const SpaceFrame& f, const BeamSection& s) {
  if (!(s.E > 0) || !(s.r_out > s.r_in) || !(s.r_in >= 0) || s.nu < 0 || s.nu >= 0.5)
    throw std::invalid_argument("beam section parameters out of range");

  const int njt = f.num_joints();
  const int nmb = f.num_members();
  const int ndof = 6 * njt;
  StiffnessSystem sys;
  sys.frame = f;
  sys.section = s;
  sys.K = Eigen::MatrixXd::Zero(ndof, ndof);
  sys.K_mb = Eigen::MatrixXd::Zero(6 * nmb, ndof);

  for (int mi = 0; mi < nmb; ++mi) {
    const int a = f.members[mi][0], b = f.members[mi][1];
    const Eigen::Vector3d pa = f.joints.col(a), pb = f.joints.col(b);
    const double L = (pb - pa).norm();
    if (L < 1e-12) throw ZeroLengthMember("member " + std::to_string(mi));

    const Eigen::Matrix3d R = member_axes(pa, pb);
    Eigen::Matrix<double, 12, 12> T = Eigen::Matrix<double, 12, 12>::Zero();
    for (int blk = 0; blk < 4; ++blk) T.block<3, 3>(3 * blk, 3 * blk) = R;
    const Eigen::Matrix<double, 12, 12> k_local = local_beam(s, L);
    const Eigen::Matrix<double, 12, 12> klT = k_local * T;
    const Eigen::Matrix<double, 12, 12> k_global = T.transpose() * klT;

    const int map[2] = {6 * a, 6 * b};
    for (int r = 0; r < 12; ++r) {
      const int gr = map[r / 6] + r % 6;
      for (int cidx = 0; cidx < 12; ++cidx) {
        const int gc = map[cidx / 6] + cidx % 6;
        sys.K(gr, gc) += k_global(r, cidx);
      }
      if (r >= 6)  // far-end rows give axial/shear/torsion/bending directly
        for (int cidx = 0; cidx < 12; ++cidx)
          sys.K_mb(6 * mi + (r - 6), map[cidx / 6] + cidx % 6) += klT(r, cidx);
    }
  }

  // Orthonormal rigid-body modes (3 translations, 3 rotations about origin).
  Eigen::MatrixXd modes = Eigen::MatrixXd::Zero(6, ndof);
  for (int j = 0; j < njt; ++j) {
    const Eigen::Vector3d p = f.joints.col(j);
    for (int k = 0; k < 3; ++k) modes(k, 6 * j + k) = 1.0;
    // rotation about axis e_k: displacement e_k x p, rotation e_k
    modes.block<3, 3>(3, 6 * j) << 0, -p.z(), p.y(), p.z(), 0, -p.x(), -p.y(), p.x(), 0;
    for (int k = 0; k < 3; ++k) modes(3 + k, 6 * j + 3 + k) = 1.0;
  }
  // Gram-Schmidt
  for (int r = 0; r < 6; ++r) {
    for (int p = 0; p < r; ++p) modes.row(r) -= modes.row(r).dot(modes.row(p)) * modes.row(p);
    modes.row(r).normalize();
  }
  sys.H_rb = modes;

  // Pseudo-inverse through the spectral decomposition; a connected frame has
  // exactly the six rigid modes at zero.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sys.K);
  const Eigen::VectorXd& lam = eig.eigenvalues();
  const double lmax = lam.cwiseAbs().maxCoeff();
  int zero_modes = 0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ndof);
  for (int i = 0; i < ndof; ++i) {
    if (lam[i] < 1e-9 * lmax)
      ++zero_modes;
    else
      inv[i] = 1.0 / lam[i];
  }
  if (zero_modes != 6)
    throw SingularStiffness("expected 6 rigid modes, found " + std::to_string(zero_modes));
  sys.K_pinv = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  return sys;
}

bool is_balanced(const StiffnessSystem& sys, const Eigen::VectorXd& P, double tol) {
  return (sys.H_rb * P).cwiseAbs().maxCoeff() <= tol * (1.0 + P.norm());
}

Eigen::VectorXd solve_displacements(const StiffnessSystem& sys, const Eigen::VectorXd& P) {
  if (P.size() != sys.K.rows()) throw std::invalid_argument("load vector size mismatch");
  if (!is_balanced(sys, P)) throw UnbalancedLoad("load has net force or moment");
  return sys.K_pinv * P;
}

std::vector<MemberLoad> member_loads(const StiffnessSystem& sys, const Eigen::VectorXd& v) {
  const Eigen::VectorXd F = sys.K_mb * v;
  std::vector<MemberLoad> out(sys.frame.members.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = F.segment<6>(static_cast<Eigen::Index>(6 * i));
  return out;
}

namespace {

// Selector of translational dof as a (3 n_jt) x (6 n_jt) matrix, plus the
// projector onto force loads that are balanced (zero work against every
// rigid mode).
Eigen::MatrixXd translation_selector(int njt) {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(3 * njt, 6 * njt);
  for (int j = 0; j < njt; ++j)
    for (int k = 0; k < 3; ++k) M(3 * j + k, 6 * j + k) = 1.0;
  return M;
}

Eigen::MatrixXd balanced_force_projector(const StiffnessSystem& sys) {
  const int njt = sys.frame.num_joints();
  const Eigen::MatrixXd Mtr = translation_selector(njt);
  const Eigen::MatrixXd Hf = sys.H_rb * Mtr.transpose();  // 6 x 3 n_jt
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(3 * njt, 3 * njt);
  // orthonormalize Hf rows, then deflate
  Eigen::MatrixXd rows = Hf;
  for (int r = 0; r < rows.rows(); ++r) {
    for (int p = 0; p < r; ++p)
      rows.row(r) -= rows.row(r).dot(rows.row(p)) * rows.row(p);
    const double nrm = rows.row(r).norm();
    if (nrm > 1e-12)
      rows.row(r) /= nrm;
    else
      rows.row(r).setZero();
  }
  P -= rows.transpose() * rows;
  return P;
}

}  // namespace

ComplianceResult max_compliance(const StiffnessSystem& sys) {
  const int njt = sys.frame.num_joints();
  const Eigen::MatrixXd Mtr = translation_selector(njt);
  const Eigen::MatrixXd Pi = balanced_force_projector(sys);
  const Eigen::MatrixXd B =
      Pi * (Mtr * sys.K_pinv * Mtr.transpose()) * Pi;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(B);
  const int top = static_cast<int>(B.rows()) - 1;

  ComplianceResult out;
  out.sigma1 = eig.eigenvalues()[top];
  const Eigen::VectorXd f = eig.eigenvectors().col(top);
  out.worst_force = Mtr.transpose() * f;  // force-only lift, moments zero
  return out;
}

AxialLoadResult max_axial_load(const StiffnessSystem& sys) {
  const int njt = sys.frame.num_joints();
  const Eigen::MatrixXd Mtr = translation_selector(njt);
  const Eigen::MatrixXd Pi = balanced_force_projector(sys);
  const Eigen::MatrixXd G = sys.K_mb * sys.K_pinv * Mtr.transpose() * Pi;

  AxialLoadResult out;
  for (int mi = 0; mi < sys.frame.num_members(); ++mi) {
    const double nrm = G.row(6 * mi).norm();  // axial row of this member
    if (nrm > out.sigma2) {
      out.sigma2 = nrm;
      out.argmax_member = mi;
    }
  }
  return out;
}

int layer_count(const Configuration& c) {
  std::vector<double> zs;
  const double tol = 1e-6 * std::max(c.module_scale, 1e-12);
  for (const auto& p : c.centered_positions) {
    bool found = false;
    for (double z : zs)
      if (std::abs(z - p.z()) < tol) {
        found = true;
        break;
      }
    if (!found) zs.push_back(p.z());
  }
  return static_cast<int>(zs.size());
}

}  // namespace modrotor
