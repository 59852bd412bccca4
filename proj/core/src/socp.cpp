#include "modrotor/socp.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace modrotor {

std::string to_string(SocpStatus s) {
  switch (s) {
    case SocpStatus::Optimal: return "optimal";
    case SocpStatus::Infeasible: return "infeasible";
    case SocpStatus::Unbounded: return "unbounded";
    case SocpStatus::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

namespace {

constexpr int kNewtonBudget = 200;   // per phase
constexpr double kMuFactor = 20.0;

struct ReducedCone {
  Eigen::MatrixXd F;  // rows x k, may be empty
  Eigen::VectorXd g;
  Eigen::VectorXd h;  // k
  double d = 0.0;
  int nu() const { return F.rows() > 0 ? 2 : 1; }
};

double min_margin(const std::vector<ReducedCone>& cones, const Eigen::VectorXd& y) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& c : cones) {
    const double s = c.h.dot(y) + c.d;
    const double r = c.F.rows() ? (c.F * y + c.g).norm() : 0.0;
    worst = std::min(worst, s - r);
  }
  return worst;
}

double barrier_value(const std::vector<ReducedCone>& cones, const Eigen::VectorXd& y) {
  double total = 0.0;
  for (const auto& c : cones) {
    const double s = c.h.dot(y) + c.d;
    if (s <= 0.0) return std::numeric_limits<double>::infinity();
    if (c.F.rows()) {
      const Eigen::VectorXd r = c.F * y + c.g;
      const double q = s * s - r.squaredNorm();
      if (q <= 0.0) return std::numeric_limits<double>::infinity();
      total -= std::log(q);
    } else {
      total -= std::log(s);
    }
  }
  return total;
}

void barrier_grad_hess(const std::vector<ReducedCone>& cones,
                       const Eigen::VectorXd& y, Eigen::VectorXd& grad,
                       Eigen::MatrixXd& hess) {
  const int k = static_cast<int>(y.size());
  grad.setZero(k);
  hess.setZero(k, k);
  for (const auto& c : cones) {
    const double s = c.h.dot(y) + c.d;
    if (c.F.rows()) {
      const Eigen::VectorXd r = c.F * y + c.g;
      const double q = s * s - r.squaredNorm();
      const Eigen::VectorXd dq = 2.0 * s * c.h - 2.0 * c.F.transpose() * r;
      grad -= dq / q;
      hess += dq * dq.transpose() / (q * q);
      hess -= (2.0 * c.h * c.h.transpose() - 2.0 * c.F.transpose() * c.F) / q;
    } else {
      grad -= c.h / s;
      hess += c.h * c.h.transpose() / (s * s);
    }
  }
}

// Damped Newton for t*c'y + barrier(y) from a strictly feasible start.
// Returns iterations used; sets converged when the Newton decrement is tiny.
int center(const std::vector<ReducedCone>& cones, const Eigen::VectorXd& c_lin,
           double t, Eigen::VectorXd& y, int budget, bool& converged) {
  const int k = static_cast<int>(y.size());
  Eigen::VectorXd grad(k), g_total(k), dy(k);
  Eigen::MatrixXd hess(k, k);
  converged = false;
  int it = 0;
  for (; it < budget; ++it) {
    barrier_grad_hess(cones, y, grad, hess);
    g_total = t * c_lin + grad;
    const double ridge = 1e-14 * (hess.trace() / std::max(k, 1) + 1.0);
    Eigen::LLT<Eigen::MatrixXd> llt(hess + ridge * Eigen::MatrixXd::Identity(k, k));
    if (llt.info() == Eigen::Success) {
      dy = -llt.solve(g_total);
    } else {
      dy = -(hess + 1e-8 * Eigen::MatrixXd::Identity(k, k))
                .ldlt()
                .solve(g_total);
    }
    const double lambda2 = -g_total.dot(dy);
    if (lambda2 <= 2e-10) {
      converged = true;
      break;
    }
    const double f0 = t * c_lin.dot(y) + barrier_value(cones, y);
    double alpha = 1.0;
    bool stepped = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Eigen::VectorXd yn = y + alpha * dy;
      const double fn = t * c_lin.dot(yn) + barrier_value(cones, yn);
      if (std::isfinite(fn) && fn <= f0 - 0.125 * alpha * lambda2) {
        y = yn;
        stepped = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!stepped) {
      converged = true;  // stalled at numerical precision, accept the center
      break;
    }
  }
  return it;
}

}  // namespace

SocpSolution solve(const SocpProblem& p, double tol) {
  SocpSolution sol;
  const int nx = p.num_vars;
  if (nx <= 0 || p.objective.size() != nx) return sol;

  // Fold box bounds into linear cone rows.
  std::vector<SocConstraint> cones_in = p.soc_constraints;
  if (!p.box_constraints.empty()) {
    for (int i = 0; i < nx; ++i) {
      const auto [lo, hi] = p.box_constraints[i];
      if (std::isfinite(lo)) {
        Eigen::VectorXd h = Eigen::VectorXd::Zero(nx);
        h[i] = 1.0;
        cones_in.push_back({Eigen::MatrixXd(0, nx), Eigen::VectorXd(0), h, -lo});
      }
      if (std::isfinite(hi)) {
        Eigen::VectorXd h = Eigen::VectorXd::Zero(nx);
        h[i] = -1.0;
        cones_in.push_back({Eigen::MatrixXd(0, nx), Eigen::VectorXd(0), h, hi});
      }
    }
  }

  // Eliminate equalities: x = x0 + N y with N an orthonormal nullspace basis.
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(nx);
  Eigen::MatrixXd N = Eigen::MatrixXd::Identity(nx, nx);
  if (!p.eq_constraints.empty()) {
    const int me = static_cast<int>(p.eq_constraints.size());
    Eigen::MatrixXd A(me, nx);
    Eigen::VectorXd b(me);
    for (int i = 0; i < me; ++i) {
      A.row(i) = p.eq_constraints[i].first.transpose();
      b[i] = p.eq_constraints[i].second;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeFullV);
    x0 = svd.solve(b);
    if ((A * x0 - b).norm() > 1e-7 * (1.0 + b.norm())) {
      sol.status = SocpStatus::Infeasible;
      return sol;
    }
    const auto& sv = svd.singularValues();
    const double smax = sv.size() ? sv[0] : 0.0;
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
      if (sv[i] > 1e-10 * (smax > 0 ? smax : 1.0)) ++rank;
    N = svd.matrixV().rightCols(nx - rank);
  }
  const int k = static_cast<int>(N.cols());

  std::vector<ReducedCone> cones;
  cones.reserve(cones_in.size());
  for (const auto& c : cones_in) {
    ReducedCone rc;
    rc.h = N.transpose() * c.h;
    rc.d = c.h.dot(x0) + c.d;
    if (c.F.rows()) {
      rc.F = c.F * N;
      rc.g = c.F * x0 + c.g;
    } else {
      rc.F = Eigen::MatrixXd(0, k);
      rc.g = Eigen::VectorXd(0);
    }
    cones.push_back(std::move(rc));
  }
  const Eigen::VectorXd c_red = N.transpose() * p.objective;

  if (k == 0) {
    // Equalities pin the point; only feasibility is left to decide.
    Eigen::VectorXd y0(0);
    const bool ok = cones.empty() || min_margin(cones, y0) >= -1e-9;
    sol.status = ok ? SocpStatus::Optimal : SocpStatus::Infeasible;
    sol.x = x0;
    sol.objective_value = p.objective.dot(x0);
    return sol;
  }

  Eigen::VectorXd y = Eigen::VectorXd::Zero(k);

  // Phase one: minimize tau with every margin relaxed by tau. A strictly
  // feasible y exists iff the optimum is negative.
  if (!cones.empty() && min_margin(cones, y) <= 1e-9) {
    std::vector<ReducedCone> ext;
    ext.reserve(cones.size() + 1);
    for (const auto& c : cones) {
      ReducedCone e;
      e.h = Eigen::VectorXd(k + 1);
      e.h.head(k) = c.h;
      e.h[k] = 1.0;
      e.d = c.d;
      if (c.F.rows()) {
        e.F = Eigen::MatrixXd(c.F.rows(), k + 1);
        e.F.leftCols(k) = c.F;
        e.F.col(k).setZero();
        e.g = c.g;
      } else {
        e.F = Eigen::MatrixXd(0, k + 1);
        e.g = Eigen::VectorXd(0);
      }
      ext.push_back(std::move(e));
    }
    {
      ReducedCone floor_row;  // tau >= -1 keeps phase one bounded
      floor_row.F = Eigen::MatrixXd(0, k + 1);
      floor_row.g = Eigen::VectorXd(0);
      floor_row.h = Eigen::VectorXd::Zero(k + 1);
      floor_row.h[k] = 1.0;
      floor_row.d = 1.0;
      ext.push_back(std::move(floor_row));
    }
    {
      // ||y|| <= R. Without this the relaxed problem has no analytic center
      // whenever the feasible set is unbounded, and the centering steps burn
      // the whole budget drifting along the recession direction. R is far
      // above the scale of any point these problems care about.
      ReducedCone ball;
      ball.F = Eigen::MatrixXd::Zero(k, k + 1);
      ball.F.topLeftCorner(k, k).setIdentity();
      ball.g = Eigen::VectorXd::Zero(k);
      ball.h = Eigen::VectorXd::Zero(k + 1);
      ball.d = 1e7;
      ext.push_back(std::move(ball));
    }
    Eigen::VectorXd cI = Eigen::VectorXd::Zero(k + 1);
    cI[k] = 1.0;
    Eigen::VectorXd z = Eigen::VectorXd::Zero(k + 1);
    z[k] = -min_margin(cones, y) + 1.0;

    int nu = 0;
    for (const auto& c : ext) nu += c.nu();
    double t = 1.0;
    int used = 0;
    bool conv = false;
    while (used < kNewtonBudget) {
      used += center(ext, cI, t, z, kNewtonBudget - used, conv);
      if (z[k] < -1e-6) break;  // strictly feasible point reached
      if (static_cast<double>(nu) / t <= 1e-10) break;
      t *= kMuFactor;
    }
    sol.newton_iters += used;
    if (z[k] >= -1e-9) {
      sol.status = SocpStatus::Infeasible;
      return sol;
    }
    y = z.head(k);
    if (min_margin(cones, y) <= 0.0) {
      sol.status = SocpStatus::Infeasible;
      return sol;
    }
  }

  // Feasibility is settled, so a cost component along a direction no cone
  // touches means the objective runs off to -inf.
  {
    Eigen::VectorXd touched = Eigen::VectorXd::Zero(k);
    for (const auto& c : cones) {
      touched += c.h.cwiseAbs();
      if (c.F.rows()) touched += c.F.cwiseAbs().colwise().sum().transpose();
    }
    for (int j = 0; j < k; ++j) {
      if (touched[j] == 0.0 && std::abs(c_red[j]) > 1e-12) {
        sol.status = SocpStatus::Unbounded;
        return sol;
      }
    }
  }

  // Phase two: follow the central path.
  int nu = 0;
  for (const auto& c : cones) nu += c.nu();
  if (nu == 0) {
    // No inequalities at all: linear objective over an affine set.
    const double cn = c_red.norm();
    if (cn > 1e-12) {
      sol.status = SocpStatus::Unbounded;
      return sol;
    }
    sol.status = SocpStatus::Optimal;
    sol.x = x0 + N * y;
    sol.objective_value = p.objective.dot(sol.x);
    return sol;
  }

  double t = std::max(1.0, static_cast<double>(nu) / (1.0 + std::abs(c_red.dot(y))));
  int used = 0;
  while (true) {
    bool conv = false;
    used += center(cones, c_red, t, y, std::max(1, kNewtonBudget - used), conv);
    const double obj = c_red.dot(y);
    if (y.norm() > 1e12 || obj < -1e18) {
      sol.status = SocpStatus::Unbounded;
      sol.newton_iters += used;
      return sol;
    }
    const double gap = static_cast<double>(nu) / t;
    if (gap <= tol * (1.0 + std::abs(obj)) || used >= kNewtonBudget) {
      sol.x = x0 + N * y;
      sol.objective_value = p.objective.dot(sol.x);
      sol.gap = gap;
      sol.newton_iters += used;
      sol.status = (gap <= 1e-2 * (1.0 + std::abs(obj)))
                       ? SocpStatus::Optimal
                       : SocpStatus::NumericalFailure;
      return sol;
    }
    t *= kMuFactor;
  }
}

ResidualReport check_solution(const SocpProblem& p, const Eigen::VectorXd& x,
                              double tol) {
  ResidualReport rep;
  rep.objective_value = p.objective.dot(x);
  for (const auto& [a, c] : p.eq_constraints)
    rep.max_eq_residual = std::max(rep.max_eq_residual, std::abs(a.dot(x) - c));
  int row = 0;
  auto soc_violation = [&](const SocConstraint& c) {
    const double s = c.h.dot(x) + c.d;
    const double r = c.F.rows() ? (c.F * x + c.g).norm() : 0.0;
    return r - s;
  };
  for (const auto& c : p.soc_constraints) {
    const double v = soc_violation(c);
    if (v > rep.max_soc_violation) {
      rep.max_soc_violation = v;
      rep.worst_soc_row = row;
    }
    ++row;
  }
  if (!p.box_constraints.empty()) {
    for (int i = 0; i < p.num_vars; ++i) {
      const auto [lo, hi] = p.box_constraints[i];
      const double v = std::max(lo - x[i], x[i] - hi);
      rep.max_soc_violation = std::max(rep.max_soc_violation, v);
    }
  }
  rep.max_soc_violation = std::max(rep.max_soc_violation, 0.0);
  rep.pass = rep.max_eq_residual <= tol && rep.max_soc_violation <= tol;
  return rep;
}

std::string dump_problem(const SocpProblem& p) {
  std::ostringstream os;
  os.precision(17);
  os << "socp vars " << p.num_vars << "\n";
  os << "min";
  for (int i = 0; i < p.objective.size(); ++i) os << " " << p.objective[i];
  os << "\n";
  for (const auto& [a, c] : p.eq_constraints) {
    os << "eq";
    for (int i = 0; i < a.size(); ++i) os << " " << a[i];
    os << " = " << c << "\n";
  }
  for (const auto& c : p.soc_constraints) {
    os << "soc rows " << c.F.rows() << "\n";
    for (int r = 0; r < c.F.rows(); ++r) {
      os << "  F";
      for (int i = 0; i < c.F.cols(); ++i) os << " " << c.F(r, i);
      os << " g " << c.g[r] << "\n";
    }
    os << "  h";
    for (int i = 0; i < c.h.size(); ++i) os << " " << c.h[i];
    os << " d " << c.d << "\n";
  }
  if (!p.box_constraints.empty()) {
    for (int i = 0; i < p.num_vars; ++i)
      os << "box " << i << " " << p.box_constraints[i].first << " "
         << p.box_constraints[i].second << "\n";
  }
  return os.str();
}

}  // namespace modrotor
