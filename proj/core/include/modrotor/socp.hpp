#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace modrotor {

// minimize c'x  subject to  a_i'x = c_i,  ||F_k x + g_k|| <= h_k'x + d_k,
// and optional per-variable bounds. A cone row with an empty F is a plain
// linear inequality h'x + d >= 0.
struct SocConstraint {
  Eigen::MatrixXd F;  // may have zero rows
  Eigen::VectorXd g;
  Eigen::VectorXd h;
  double d = 0.0;
};

struct SocpProblem {
  int num_vars = 0;
  Eigen::VectorXd objective;
  std::vector<std::pair<Eigen::VectorXd, double>> eq_constraints;
  std::vector<SocConstraint> soc_constraints;
  std::vector<std::pair<double, double>> box_constraints;  // empty or per-var

  void add_eq(const Eigen::VectorXd& a, double rhs) { eq_constraints.emplace_back(a, rhs); }
  void add_soc(Eigen::MatrixXd F, Eigen::VectorXd g, Eigen::VectorXd h, double d) {
    soc_constraints.push_back({std::move(F), std::move(g), std::move(h), d});
  }
  // h'x + d >= 0
  void add_linear(const Eigen::VectorXd& h, double d) {
    soc_constraints.push_back({Eigen::MatrixXd(0, num_vars), Eigen::VectorXd(0), h, d});
  }
};

enum class SocpStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

std::string to_string(SocpStatus s);

struct SocpSolution {
  SocpStatus status = SocpStatus::NumericalFailure;
  Eigen::VectorXd x;
  double objective_value = 0.0;
  int newton_iters = 0;
  double gap = 0.0;  // barrier duality-gap bound at exit
};

// Log-barrier path-following interior-point method; equalities are
// eliminated onto an orthonormal nullspace basis, feasibility is established
// by an auxiliary phase-one program.
SocpSolution solve(const SocpProblem& p, double tol = 1e-8);

struct ResidualReport {
  double max_eq_residual = 0.0;
  double max_soc_violation = 0.0;
  double objective_value = 0.0;
  int worst_soc_row = -1;
  bool pass = false;
};

ResidualReport check_solution(const SocpProblem& p, const Eigen::VectorXd& x,
                              double tol = 1e-6);

// Plain-text dump of a problem, one constraint per line; meant for external
// debugging of hard instances.
std::string dump_problem(const SocpProblem& p);

}  // namespace modrotor
