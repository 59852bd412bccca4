#pragma once

#include <array>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "modrotor/allocation.hpp"
#include "modrotor/dynamics.hpp"
#include "modrotor/geometry.hpp"

namespace modrotor {

struct AdmissibleGraph {
  std::vector<Eigen::Vector3i> vertices;  // lattice coordinates, origin first
  std::vector<std::array<int, 2>> edges;  // index pairs, difference is a connection
  int depth = 0;
};

AdmissibleGraph build_graph(int n_modules);

enum class ObjectiveKind { TorqueAuthority, EllipseAuthority, StructuralBound };

struct WakeParams {
  bool enabled = true;
  double radius = 0.0;  // 0 selects the module circumradius at module_scale
  double length = std::numeric_limits<double>::infinity();
};

// x is in the wake of a rotor at y pointing along eta when it sits inside the
// cylinder trailing downstream (against eta) from y.
bool wake_predicate(const Eigen::Vector3d& x, const Eigen::Vector3d& y,
                    const Eigen::Vector3d& eta, const WakeParams& params);

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::TorqueAuthority;
  Mat6 Q = Mat6::Zero();  // EllipseAuthority metric; defaulted to torque block
  Mat6 H_target = Mat6::Identity();  // fixed projector used by the exported model
  double hover_u = 0.5;   // uniform nominal control the authority is measured from
  double module_scale = 0.3;
  ModuleParams params;
  WakeParams wake;
  std::vector<int> allowed_orientations;  // empty = all 20
  std::vector<int> allowed_spins;         // empty = {+1, -1}
};

struct ModelVariable {
  std::string name;
  bool binary = false;
  double lb = 0.0;
  double ub = 1.0;
};

struct LinearRow {
  std::string tag;
  std::vector<std::pair<int, double>> a;  // sparse coefficients
  double lo = 0.0;
  double hi = 0.0;  // lo == hi encodes an equality
};

// ||F x + g|| <= h.x + d with sparse F rows.
struct ConicRow {
  std::string tag;
  std::vector<std::vector<std::pair<int, double>>> F;
  std::vector<double> g;
  std::vector<std::pair<int, double>> h;
  double d = 0.0;
};

struct InfeasibleSkeleton : std::runtime_error {
  explicit InfeasibleSkeleton(const std::string& what) : std::runtime_error(what) {}
};
struct SearchTooLarge : std::runtime_error {
  explicit SearchTooLarge(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigModel {
  AdmissibleGraph graph;
  int n = 0;
  ObjectiveSpec objective;
  std::vector<Eigen::Vector3d> positions;  // world coordinates of graph vertices

  std::vector<ModelVariable> vars;
  std::map<std::string, int> var_index;
  std::vector<LinearRow> rows;
  std::vector<ConicRow> soc_rows;
  std::vector<std::pair<int, double>> objective_terms;
  bool maximize = false;
  double big_m_c = 0.0;  // allocation coefficient bound
  double big_m_w = 0.0;  // displacement bound (structural models)

  int var(const std::string& name) const;
};

ConfigModel build_model(const AdmissibleGraph& g, int n, const ObjectiveSpec& objective);

struct Assignment {
  std::vector<int> vertex_ids;  // into graph.vertices
  std::vector<int> orientations;
  std::vector<int> spins;  // +1 / -1
  Eigen::MatrixXd C;       // rows for placed modules (actuation objectives)
  Eigen::Vector3d z = Eigen::Vector3d::Zero();
  double objective = std::numeric_limits<double>::quiet_NaN();
};

struct VerifyReport {
  std::vector<std::pair<std::string, bool>> checks;
  bool pass = false;
};

VerifyReport verify_assignment(const ConfigModel& model, const Assignment& a,
                               double tol = 1e-6);

// Contiguity checks used by tests and the solvers: the flow system with the
// sink fixed on the first allocated vertex is feasible exactly when the
// allocated subgraph is connected.
bool flow_feasible(const AdmissibleGraph& g, const std::vector<int>& subset, int n);
bool flow_lp_feasible(const AdmissibleGraph& g, const std::vector<int>& subset, int n);
bool subset_connected(const AdmissibleGraph& g, const std::vector<int>& subset);

enum class SolveStatus { Optimal, Infeasible, NodeLimit, TimeLimit };
std::string to_string(SolveStatus s);

struct SolveLimits {
  long long max_leaves = 10'000'000;
  long long node_limit = std::numeric_limits<long long>::max();
  double time_limit_s = std::numeric_limits<double>::infinity();
};

struct SolveResult {
  SolveStatus status = SolveStatus::Infeasible;
  Assignment best;
  double objective = std::numeric_limits<double>::quiet_NaN();
  long long nodes = 0;
  long long evaluations = 0;
  double bound_gap = std::numeric_limits<double>::infinity();
};

SolveResult solve_exhaustive(const ConfigModel& model, const SolveLimits& limits = {});
SolveResult solve_branch_and_bound(const ConfigModel& model, const SolveLimits& limits = {},
                                   const Assignment* warm_start = nullptr);

void export_model(const ConfigModel& model, const std::string& path);
std::string model_to_text(const ConfigModel& model);
ConfigModel parse_model(const std::string& path);
ConfigModel parse_model_text(const std::string& text);

}  // namespace modrotor
