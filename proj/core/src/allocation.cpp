#include "modrotor/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace modrotor {

namespace {

constexpr double kRankTol = 1e-8;
constexpr unsigned kSampleSeed = 20240817;  // boundary-verification draws
constexpr int kBoundarySamples = 512;

// E|N(0,1)|^{3/2} = 2^{3/4} Gamma(5/4) / sqrt(pi)
const double kAbsMomentConst =
    std::pow(2.0, 0.75) * std::tgamma(1.25) / std::sqrt(std::numbers::pi);

Eigen::MatrixXd pinv(const Eigen::MatrixXd& M, double tol = kRankTol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = tol * (sv.size() ? sv[0] : 0.0);
  Eigen::VectorXd inv = sv;
  for (int i = 0; i < sv.size(); ++i) inv[i] = sv[i] > cutoff ? 1.0 / sv[i] : 0.0;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

// Spectral square roots of a PSD matrix restricted to its range.
struct PsdRoots {
  Mat6 half;       // Q^{1/2}
  Mat6 pinv_half;  // (Q^+)^{1/2}
  Mat6 pinv_full;  // Q^+
  Mat6 proj;       // projector onto range(Q)
  int rank = 0;
};

PsdRoots psd_roots(const Mat6& Q) {
  Eigen::SelfAdjointEigenSolver<Mat6> eig(Q);
  PsdRoots r;
  r.half.setZero();
  r.pinv_half.setZero();
  r.pinv_full.setZero();
  r.proj.setZero();
  const double lmax = eig.eigenvalues().cwiseAbs().maxCoeff();
  for (int i = 0; i < 6; ++i) {
    const double l = eig.eigenvalues()[i];
    if (l > kRankTol * std::max(lmax, 1e-300)) {
      const Vec6 v = eig.eigenvectors().col(i);
      r.half += std::sqrt(l) * v * v.transpose();
      r.pinv_half += (1.0 / std::sqrt(l)) * v * v.transpose();
      r.pinv_full += (1.0 / l) * v * v.transpose();
      r.proj += v * v.transpose();
      ++r.rank;
    }
  }
  return r;
}

}  // namespace

Mat6 projector(const Eigen::MatrixXd& M_tt) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M_tt, Eigen::ComputeFullU);
  const auto& sv = svd.singularValues();
  const double cutoff = kRankTol * (sv.size() ? sv[0] : 0.0);
  Mat6 H = Mat6::Zero();
  for (int i = 0; i < sv.size(); ++i) {
    if (sv[i] > cutoff) {
      const Vec6 u = svd.matrixU().col(i);
      H += u * u.transpose();
    }
  }
  return H;
}

AllocationMatrix pseudo_inverse_allocation(const VehicleModel& m) {
  AllocationMatrix a;
  a.C = pinv(m.M_tt);
  a.H = projector(m.M_tt);
  a.method = AllocationMethod::PseudoInverse;
  return a;
}

EllipseSpec ellipse_from(const Mat6& Q) {
  EllipseSpec e;
  e.Q = Q;
  e.S = psd_roots(Q).proj;
  return e;
}

namespace {

// Shared constraint assembly for the allocation programs: variables are the
// n*6 entries of C in row-major order, plus one trailing scalar.
void add_properness_rows(SocpProblem& p, const Eigen::MatrixXd& M_tt,
                         const Mat6& H) {
  const int n = static_cast<int>(M_tt.cols());
  const int nx = p.num_vars;
  for (int r = 0; r < 6; ++r) {
    for (int q = 0; q < 6; ++q) {
      Eigen::VectorXd a = Eigen::VectorXd::Zero(nx);
      for (int i = 0; i < n; ++i) a[i * 6 + q] = M_tt(r, i);
      p.add_eq(a, H(r, q));
    }
  }
  const Mat6 HmI = H - Mat6::Identity();
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < 6; ++c) {
      Eigen::VectorXd a = Eigen::VectorXd::Zero(nx);
      for (int q = 0; q < 6; ++q) a[i * 6 + q] = HmI(q, c);
      p.add_eq(a, 0.0);
    }
  }
}

}  // namespace

AuthorityResult max_authority_allocation(const VehicleModel& m,
                                         const Eigen::VectorXd& u_h,
                                         const EllipseSpec& e) {
  const int n = m.n;
  const Eigen::VectorXd headroom = m.b - m.A * u_h;
  if ((headroom.array() <= 0.0).any())
    throw HoverNotInterior("hover control touches a bound");
  const PsdRoots roots = psd_roots(e.Q);
  if (roots.rank == 0) throw std::invalid_argument("ellipse metric Q is zero");

  const Mat6 H = projector(m.M_tt);
  SocpProblem p;
  p.num_vars = n * 6 + 1;
  p.objective = Eigen::VectorXd::Zero(p.num_vars);
  p.objective[n * 6] = 1.0;  // minimize s
  add_properness_rows(p, m.M_tt, H);

  for (int row = 0; row < 2 * n; ++row) {
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(6, p.num_vars);
    for (int j = 0; j < n; ++j) {
      const double aij = m.A(row, j);
      if (aij == 0.0) continue;
      for (int qi = 0; qi < 6; ++qi)
        for (int pi = 0; pi < 6; ++pi)
          F(qi, j * 6 + pi) += aij * roots.pinv_half(qi, pi);
    }
    Eigen::VectorXd h = Eigen::VectorXd::Zero(p.num_vars);
    h[n * 6] = headroom[row];
    p.add_soc(std::move(F), Eigen::VectorXd::Zero(6), std::move(h), 0.0);
  }

  const SocpSolution sol = solve(p, 1e-9);
  if (sol.status != SocpStatus::Optimal)
    throw SolverFailure("authority program: " + to_string(sol.status));
  const auto rep = check_solution(p, sol.x, 1e-6);
  if (!rep.pass) throw SolverFailure("authority program failed residual check");

  AuthorityResult out;
  out.alloc.H = H;
  out.alloc.method = AllocationMethod::MaxAuthority;
  out.alloc.C.resize(n, 6);
  for (int i = 0; i < n; ++i)
    for (int q = 0; q < 6; ++q) out.alloc.C(i, q) = sol.x[i * 6 + q];
  const double s = sol.x[n * 6];
  if (s <= 0.0) throw SolverFailure("authority program returned nonpositive s");
  out.radius = 1.0 / s;

  // Binding row: the bound whose scaled margin is tight.
  double worst = -1.0;
  for (int row = 0; row < 2 * n; ++row) {
    const Eigen::VectorXd v = out.alloc.C.transpose() * m.A.row(row).transpose();
    const double nrm = (roots.pinv_half * v).norm();
    const double ratio = nrm / headroom[row];
    if (ratio > worst) {
      worst = ratio;
      out.binding_row = row;
      const double denom = std::sqrt(v.dot(roots.pinv_full * v));
      out.binding_direction =
          denom > 0 ? Vec6(out.radius * (roots.pinv_full * v) / denom) : Vec6::Zero();
    }
  }

  // Boundary sampling check mandated by the contract: everything on the
  // boundary must be feasible, and inflating the radius slightly must break
  // at least one bound somewhere.
  std::mt19937_64 rng(kSampleSeed);
  std::normal_distribution<double> normal(0.0, 1.0);
  bool inflated_violates = false;
  auto worst_margin_at = [&](const Vec6& t) {
    return (m.b - m.A * (u_h + out.alloc.C * (e.S * t))).minCoeff();
  };
  for (int k = 0; k < kBoundarySamples; ++k) {
    Vec6 d;
    for (int i = 0; i < 6; ++i) d[i] = normal(rng);
    d = roots.proj * d;
    if (d.norm() < 1e-12) continue;
    d.normalize();
    const Vec6 t = out.radius * (roots.pinv_half * d);
    if (worst_margin_at(t) < -1e-6)
      throw SolverFailure("authority verification: sampled boundary violates bounds");
    if (worst_margin_at((1.0 + 1e-3) * t) < 0.0) inflated_violates = true;
  }
  if (worst_margin_at((1.0 + 1e-3) * out.binding_direction) < 0.0)
    inflated_violates = true;
  if (!inflated_violates)
    throw SolverFailure("authority verification: radius is not tight");
  return out;
}

SubspaceRadius authority_radius(const VehicleModel& m, const AllocationMatrix& alloc,
                                const Eigen::VectorXd& u_h, const Mat6& subspace_proj) {
  const Eigen::VectorXd headroom = m.b - m.A * u_h;
  if ((headroom.array() <= 0.0).any())
    throw HoverNotInterior("hover control touches a bound");
  const PsdRoots roots = psd_roots(subspace_proj);
  SubspaceRadius out;
  double smax = 0.0;
  double smax_full = 0.0;
  for (int row = 0; row < m.A.rows(); ++row) {
    const Eigen::VectorXd v = alloc.C.transpose() * m.A.row(row).transpose();
    const double nrm = (roots.pinv_half * v).norm();
    const double ratio = nrm / headroom[row];
    smax_full = std::max(smax_full, v.norm() / headroom[row]);
    if (ratio > smax) {
      smax = ratio;
      out.binding_row = row;
    }
  }
  // The subspace only matters if the bounds actually feel it; compare against
  // the full-space sensitivity so roundoff in an annihilated direction does
  // not masquerade as a huge finite radius.
  if (smax <= 1e-9 * smax_full) {
    out.degenerate = true;
    out.radius = 0.0;
    out.binding_row = -1;
    return out;
  }
  out.radius = 1.0 / smax;
  return out;
}

SubspaceRadius authority_radius(const VehicleModel& m, const AllocationMatrix& alloc,
                                const Mat6& subspace_proj) {
  return authority_radius(m, alloc, hover_vector(m).u_h, subspace_proj);
}

namespace {

// log 1F1(a,b,z) for a,b,z > 0 via the positive-term series, summed in log
// space so large z stays finite.
double log_hyp1f1_positive(double a, double b, double z) {
  double log_sum = 0.0;   // s = 0 term
  double log_term = 0.0;
  const double log_z = std::log(z);
  const int max_terms = 200000;
  for (int s = 0; s < max_terms; ++s) {
    log_term += std::log(a + s) - std::log(b + s) + log_z - std::log1p(s);
    log_sum = std::max(log_sum, log_term) +
              std::log1p(std::exp(-std::abs(log_sum - log_term)));
    if (log_term < log_sum - 40.0 && s > z) break;  // tail below 4e-18 relative
  }
  return log_sum;
}

}  // namespace

double hyp1f1(double a, double b, double z) {
  if (b <= 0.0 && b == std::floor(b))
    throw DomainError("1F1 undefined for nonpositive integer b");
  if (z == 0.0) return 1.0;
  if (z < 0.0) {
    // Kummer's transformation moves the evaluation to a positive-term
    // series when b - a >= 0; the product is formed in log space. a == b
    // degenerates to exp(z) exactly.
    const double ap = b - a;
    if (ap >= 0.0 && b > 0.0)
      return std::exp(z + log_hyp1f1_positive(ap, b, -z));
    // fall through on exotic parameters: direct alternating series
  }
  if (z > 0.0 && a > 0.0 && b > 0.0) return std::exp(log_hyp1f1_positive(a, b, z));
  // Direct series with compensated summation; fine for moderate |z|.
  long double sum = 1.0L, term = 1.0L;
  for (int s = 0; s < 200000; ++s) {
    term *= (static_cast<long double>(a) + s) /
            ((static_cast<long double>(b) + s) * (s + 1)) * z;
    sum += term;
    if (std::abs(static_cast<double>(term)) <
        1e-15 * std::abs(static_cast<double>(sum)) + 1e-300)
      break;
  }
  return static_cast<double>(sum);
}

double avg_power(const Vec6& c_row, double u_h_i, const Mat6& Sigma) {
  const double q = c_row.dot(Sigma * c_row);
  const double mu = u_h_i;
  if (q <= 0.0) return std::pow(std::abs(mu), 1.5);
  const double x = mu * mu / (2.0 * q);
  if (x > 1e4) {
    // Deep deterministic regime; two-term expansion of the absolute moment.
    const double ratio = q / (mu * mu);
    return std::pow(std::abs(mu), 1.5) * (1.0 + 0.375 * ratio);
  }
  return kAbsMomentConst * std::pow(q, 0.75) * hyp1f1(-0.75, 0.5, -x);
}

ConvexityReport convexity_check_f(const std::vector<double>& grid) {
  ConvexityReport rep;
  rep.positive = true;
  auto f = [](double x) { return std::pow(x, -0.75) * hyp1f1(-0.75, 0.5, -x); };
  std::vector<double> vals(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    vals[i] = f(grid[i]);
    if (!(vals[i] > 0.0)) rep.positive = false;
  }
  rep.min_second_difference = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
    // Non-uniform central second difference.
    const double h1 = grid[i] - grid[i - 1];
    const double h2 = grid[i + 1] - grid[i];
    const double d2 =
        2.0 * (h1 * vals[i + 1] - (h1 + h2) * vals[i] + h2 * vals[i - 1]) /
        (h1 * h2 * (h1 + h2));
    if (d2 < rep.min_second_difference) {
      rep.min_second_difference = d2;
      rep.argmin = grid[i];
    }
  }
  rep.convex = rep.min_second_difference >= -1e-8;
  return rep;
}

namespace {

double max_power_of(const Eigen::MatrixXd& C, const Eigen::VectorXd& u_h,
                    const Mat6& Sigma) {
  double worst = 0.0;
  for (int i = 0; i < C.rows(); ++i)
    worst = std::max(worst, avg_power(C.row(i).transpose(), u_h[i], Sigma));
  return worst;
}

// d avg_power / d c for one row (u_h_i fixed); zero when Sigma c = 0.
Vec6 power_gradient(const Vec6& c, double mu, const Mat6& Sigma) {
  const double q = c.dot(Sigma * c);
  if (q <= 1e-300) return Vec6::Zero();
  const double x = mu * mu / (2.0 * q);
  double dPdq;
  if (x > 1e4) {
    dPdq = std::pow(std::abs(mu), 1.5) * 0.375 / (mu * mu);
  } else {
    const double F = hyp1f1(-0.75, 0.5, -x);
    const double Fp = -1.5 * hyp1f1(0.25, 1.5, -x);  // dF/dz at z = -x
    dPdq = kAbsMomentConst *
           (0.75 * std::pow(q, -0.25) * F +
            std::pow(q, 0.75) * Fp * (mu * mu / (2.0 * q * q)));
  }
  return dPdq * 2.0 * (Sigma * c);
}

}  // namespace

MinPowerResult min_power_allocation(const VehicleModel& m, const Eigen::VectorXd& u_h,
                                    const PowerModel& pm, int max_iters) {
  const int n = m.n;
  const int nv = n * 6;
  const Mat6 H = projector(m.M_tt);
  const Vec6 t_h = (Vec6() << 0, 0, m.m_total * m.params.g, 0, 0, 0).finished();

  // Stack the affine constraints on vec(C): properness and C t_h = u_h.
  const int rows = 36 + 6 * n + n;
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(rows, nv);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(rows);
  int r = 0;
  for (int a = 0; a < 6; ++a)
    for (int q = 0; q < 6; ++q) {
      for (int i = 0; i < n; ++i) L(r, i * 6 + q) = m.M_tt(a, i);
      rhs[r++] = H(a, q);
    }
  const Mat6 HmI = H - Mat6::Identity();
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 6; ++c) {
      for (int q = 0; q < 6; ++q) L(r, i * 6 + q) = HmI(q, c);
      rhs[r++] = 0.0;
    }
  for (int i = 0; i < n; ++i) {
    for (int q = 0; q < 6; ++q) L(r, i * 6 + q) = t_h[q];
    rhs[r++] = u_h[i];
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(L, Eigen::ComputeThinU | Eigen::ComputeFullV);
  Eigen::VectorXd x_part = svd.solve(rhs);
  if ((L * x_part - rhs).norm() > 1e-7 * (1.0 + rhs.norm()))
    throw SolverFailure("min-power constraints are inconsistent with u_h");
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-10 * sv[0]) ++rank;
  const Eigen::MatrixXd N = svd.matrixV().rightCols(nv - rank);

  // Start from the pseudo-inverse projected onto the feasible set.
  Eigen::VectorXd c0_vec(nv);
  const Eigen::MatrixXd Mp = pinv(m.M_tt);
  for (int i = 0; i < n; ++i)
    for (int q = 0; q < 6; ++q) c0_vec[i * 6 + q] = Mp(i, q);
  Eigen::VectorXd x = x_part + N * (N.transpose() * (c0_vec - x_part));

  auto unpack = [&](const Eigen::VectorXd& v) {
    Eigen::MatrixXd C(n, 6);
    for (int i = 0; i < n; ++i)
      for (int q = 0; q < 6; ++q) C(i, q) = v[i * 6 + q];
    return C;
  };

  Eigen::MatrixXd C = unpack(x);
  double best = max_power_of(C, u_h, pm.Sigma);
  Eigen::VectorXd x_best = x;
  int it = 0;
  double step = 1.0;
  for (; it < max_iters; ++it) {
    // Subgradient of the max: average the gradients of near-active rows.
    const double cur = max_power_of(C, u_h, pm.Sigma);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(nv);
    int active = 0;
    for (int i = 0; i < n; ++i) {
      const double pi = avg_power(C.row(i).transpose(), u_h[i], pm.Sigma);
      if (pi >= cur * (1.0 - 1e-6)) {
        const Vec6 gi = power_gradient(C.row(i).transpose(), u_h[i], pm.Sigma);
        for (int q = 0; q < 6; ++q) g[i * 6 + q] += gi[q];
        ++active;
      }
    }
    if (active == 0) break;
    g /= active;
    Eigen::VectorXd d = N * (N.transpose() * g);
    const double dn = d.norm();
    if (dn < 1e-14) break;
    d /= dn;

    bool improved = false;
    for (int ls = 0; ls < 40; ++ls) {
      const Eigen::VectorXd xn = x - step * d;
      const double fn = max_power_of(unpack(xn), u_h, pm.Sigma);
      if (fn < best - 1e-15) {
        x = xn;
        C = unpack(x);
        best = fn;
        x_best = x;
        improved = true;
        step *= 1.5;
        break;
      }
      step *= 0.5;
    }
    if (!improved && step < 1e-12) break;
  }

  MinPowerResult out;
  out.alloc.C = unpack(x_best);
  out.alloc.H = H;
  out.alloc.method = AllocationMethod::MinPower;
  out.max_avg_power = best;
  out.iterations = it;

  // Final verification: properness, the hover pin, and no regression
  // against the plain pseudo-inverse.
  if ((m.M_tt * out.alloc.C - H).cwiseAbs().maxCoeff() > 1e-7 ||
      (out.alloc.C * H - out.alloc.C).cwiseAbs().maxCoeff() > 1e-7 ||
      (out.alloc.C * t_h - u_h).cwiseAbs().maxCoeff() > 1e-7)
    throw SolverFailure("min-power result is not a proper allocation");
  const double pinv_power = max_power_of(Mp, u_h, pm.Sigma);
  if (best > pinv_power + 1e-6) {
    if (it >= max_iters) throw NonConvergence("min-power iteration cap reached");
    throw SolverFailure("min-power result worse than pseudo-inverse");
  }
  return out;
}

bool ReachableUnder::member(const Vec6& t, double tol) const {
  return ((G * t - w).array() <= tol).all();
}

ReachableUnder reachable_under(const VehicleModel& m, const AllocationMatrix& alloc,
                               const Eigen::VectorXd& u_h) {
  ReachableUnder r;
  r.G = m.A * alloc.C;
  r.w = m.b - m.A * u_h;
  return r;
}

bool ReachableGlobal::member(const Eigen::Vector3d& pt, double tol) const {
  if (rank == 3) {
    for (int i = 0; i < facet_normals.cols(); ++i)
      if (facet_normals.col(i).dot(pt) > facet_offsets[i] + tol) return false;
    return true;
  }
  // Flat cases: check the affine hull first, then support in every
  // generator-spanned direction (a low-dimensional zonotope is still
  // described by its support function).
  Eigen::Vector3d d = pt - center;
  Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(generators, Eigen::ComputeFullU);
  for (int i = rank; i < 3; ++i) {
    const Eigen::Vector3d nrm = svd.matrixU().col(i);
    if (std::abs(nrm.dot(d)) > tol) return false;
  }
  // Support check over directions spanning the flat.
  std::vector<Eigen::Vector3d> dirs;
  if (rank == 1) {
    dirs.push_back(svd.matrixU().col(0));
    dirs.push_back(-svd.matrixU().col(0));
  } else if (rank == 2) {
    for (int a = 0; a < 720; ++a) {
      const double th = a * std::numbers::pi / 360.0;
      dirs.push_back(std::cos(th) * svd.matrixU().col(0) +
                     std::sin(th) * svd.matrixU().col(1));
    }
  }
  for (const auto& dir : dirs) {
    double support = 0.0;
    for (int gi = 0; gi < generators.cols(); ++gi)
      support += std::abs(dir.dot(generators.col(gi)));
    if (dir.dot(d) > support + tol) return false;
  }
  return true;
}

ReachableGlobal reachable_global(const VehicleModel& m, const std::array<int, 3>& axes) {
  if (m.n > 16) throw TooManyModules("global reachable set limited to 16 modules");
  ReachableGlobal out;
  out.axes = axes;

  const double lo = m.params.u_min, hi = m.params.u_max;
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  Eigen::Matrix3Xd G(3, m.n);
  Eigen::Vector3d z0 = Eigen::Vector3d::Zero();
  for (int i = 0; i < m.n; ++i) {
    Eigen::Vector3d col;
    for (int a = 0; a < 3; ++a) col[a] = m.M_tt(axes[a], i);
    G.col(i) = half * col;
    z0 += mid * col;
  }
  out.center = z0;
  out.generators = G;

  Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(G);
  const auto& sv = svd.singularValues();
  out.rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-9 * (sv[0] > 0 ? sv[0] : 1.0)) ++out.rank;

  // All box-vertex projections (the guard keeps 2^n tractable).
  const std::size_t count = std::size_t{1} << m.n;
  out.vertex_cloud.resize(3, static_cast<Eigen::Index>(count));
  for (std::size_t mask = 0; mask < count; ++mask) {
    Eigen::Vector3d v = z0;
    for (int i = 0; i < m.n; ++i)
      v += ((mask >> i) & 1u) ? G.col(i) : Eigen::Vector3d(-G.col(i));
    out.vertex_cloud.col(static_cast<Eigen::Index>(mask)) = v;
  }

  if (out.rank == 3) {
    // Facet normals of a 3-D zonotope: cross products of generator pairs.
    std::vector<Eigen::Vector3d> normals;
    for (int i = 0; i < m.n; ++i) {
      for (int j = i + 1; j < m.n; ++j) {
        Eigen::Vector3d nrm = G.col(i).cross(G.col(j));
        const double len = nrm.norm();
        if (len < 1e-12) continue;
        nrm /= len;
        bool dup = false;
        for (const auto& ex : normals)
          if ((ex - nrm).norm() < 1e-9 || (ex + nrm).norm() < 1e-9) {
            dup = true;
            break;
          }
        if (!dup) normals.push_back(nrm);
      }
    }
    out.facet_normals.resize(3, static_cast<Eigen::Index>(2 * normals.size()));
    out.facet_offsets.resize(static_cast<Eigen::Index>(2 * normals.size()));
    for (std::size_t k = 0; k < normals.size(); ++k) {
      for (int sgn = 0; sgn < 2; ++sgn) {
        const Eigen::Vector3d f = sgn ? Eigen::Vector3d(-normals[k]) : normals[k];
        double support = f.dot(z0);
        for (int i = 0; i < m.n; ++i) support += std::abs(f.dot(G.col(i)));
        const auto idx = static_cast<Eigen::Index>(2 * k + sgn);
        out.facet_normals.col(idx) = f;
        out.facet_offsets[idx] = support;
      }
    }
  } else {
    out.facet_normals.resize(3, 0);
    out.facet_offsets.resize(0);
  }
  return out;
}

std::string to_off(const ReachableGlobal& hull) {
  if (hull.rank != 3) return "OFF\n0 0 0\n";
  // Each facet of a zonotope is a zonogon; walk its boundary by sorting the
  // in-plane generators by angle.
  std::vector<Eigen::Vector3d> verts;
  std::vector<std::vector<int>> faces;
  auto vertex_id = [&](const Eigen::Vector3d& v) {
    for (std::size_t i = 0; i < verts.size(); ++i)
      if ((verts[i] - v).norm() < 1e-9) return static_cast<int>(i);
    verts.push_back(v);
    return static_cast<int>(verts.size() - 1);
  };
  const auto& G = hull.generators;
  for (int fidx = 0; fidx < hull.facet_normals.cols(); ++fidx) {
    const Eigen::Vector3d f = hull.facet_normals.col(fidx);
    Eigen::Vector3d base = hull.center;
    std::vector<Eigen::Vector3d> free_gens;
    for (int i = 0; i < G.cols(); ++i) {
      const double side = f.dot(G.col(i));
      if (std::abs(side) > 1e-9)
        base += (side > 0 ? 1.0 : -1.0) * G.col(i);
      else
        free_gens.push_back(G.col(i));
    }
    if (free_gens.size() < 2) continue;
    Eigen::Vector3d e1 = free_gens[0].normalized();
    Eigen::Vector3d e2 = f.cross(e1);
    std::sort(free_gens.begin(), free_gens.end(),
              [&](const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
                double aa = std::atan2(a.dot(e2), a.dot(e1));
                double ab = std::atan2(b.dot(e2), b.dot(e1));
                if (aa < 0) aa += std::numbers::pi;
                if (ab < 0) ab += std::numbers::pi;
                return aa < ab;
              });
    // Start at the vertex minimizing every free generator's contribution,
    // then add them twice around (zonogon boundary).
    Eigen::Vector3d cur = base;
    std::vector<Eigen::Vector3d> oriented;
    for (auto& gvec : free_gens) {
      const Eigen::Vector3d g2 = gvec;
      oriented.push_back((std::atan2(g2.dot(e2), g2.dot(e1)) >= 0) ? g2
                                                                    : Eigen::Vector3d(-g2));
    }
    for (const auto& g2 : oriented) cur -= g2;
    std::vector<int> face;
    face.push_back(vertex_id(cur));
    for (const auto& g2 : oriented) {
      cur += 2.0 * g2;
      face.push_back(vertex_id(cur));
    }
    for (const auto& g2 : oriented) {
      cur -= 2.0 * g2;
      const int id = vertex_id(cur);
      if (id != face.front()) face.push_back(id);
    }
    // Orient the polygon so its normal matches f.
    if (face.size() >= 3) {
      const Eigen::Vector3d a = verts[face[0]], b = verts[face[1]], c = verts[face[2]];
      if ((b - a).cross(c - a).dot(f) < 0) std::reverse(face.begin(), face.end());
      faces.push_back(face);
    }
  }
  std::ostringstream os;
  os << "OFF\n" << verts.size() << " " << faces.size() << " 0\n";
  os.precision(12);
  for (const auto& v : verts) os << v.x() << " " << v.y() << " " << v.z() << "\n";
  for (const auto& f : faces) {
    os << f.size();
    for (int id : f) os << " " << id;
    os << "\n";
  }
  return os.str();
}

AllocateResult allocate(const AllocationMatrix& alloc, const Vec6& t_cmd,
                        const VehicleModel& m, const Eigen::VectorXd& u_h,
                        const Vec6& t_h) {
  const Eigen::VectorXd delta = alloc.C * (t_cmd - t_h);
  const double lo = m.params.u_min, hi = m.params.u_max;
  double alpha = 1.0;
  for (int i = 0; i < delta.size(); ++i) {
    if (delta[i] > 1e-15)
      alpha = std::min(alpha, (hi - u_h[i]) / delta[i]);
    else if (delta[i] < -1e-15)
      alpha = std::min(alpha, (lo - u_h[i]) / delta[i]);
  }
  alpha = std::clamp(alpha, 0.0, 1.0);
  AllocateResult out;
  out.alpha = alpha;
  out.u = u_h + alpha * delta;
  return out;
}

}  // namespace modrotor
