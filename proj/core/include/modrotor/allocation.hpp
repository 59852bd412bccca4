#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "modrotor/dynamics.hpp"
#include "modrotor/socp.hpp"

namespace modrotor {

using Mat6 = Eigen::Matrix<double, 6, 6>;

enum class AllocationMethod { PseudoInverse, MaxAuthority, MinPower };

struct AllocationMatrix {
  Eigen::MatrixXd C;        // n x 6
  Mat6 H = Mat6::Zero();    // orthogonal projector onto range(M_tt)
  AllocationMethod method = AllocationMethod::PseudoInverse;
};

struct EllipseSpec {
  Mat6 Q = Mat6::Identity();  // symmetric PSD; the ellipse metric
  Mat6 S = Mat6::Identity();  // orthogonal projector onto range(Q)
};

EllipseSpec ellipse_from(const Mat6& Q);

struct PowerModel {
  Mat6 Sigma = Mat6::Identity();
  Eigen::VectorXd u_h;
};

struct HoverNotInterior : std::runtime_error {
  explicit HoverNotInterior(const std::string& what) : std::runtime_error(what) {}
};
struct SolverFailure : std::runtime_error {
  explicit SolverFailure(const std::string& what) : std::runtime_error(what) {}
};
struct TooManyModules : std::runtime_error {
  explicit TooManyModules(const std::string& what) : std::runtime_error(what) {}
};

Mat6 projector(const Eigen::MatrixXd& M_tt);

AllocationMatrix pseudo_inverse_allocation(const VehicleModel& m);

struct AuthorityResult {
  AllocationMatrix alloc;
  double radius = 0.0;
  int binding_row = -1;        // index into the stacked bound rows
  Vec6 binding_direction = Vec6::Zero();
};

// Program: minimize s subject to M_tt C = H, C H = C and, for every control
// bound row i, ||Q^+ half applied to (A_i C)|| <= s (b_i - A_i u_h); the
// reported radius is 1/s.
AuthorityResult max_authority_allocation(const VehicleModel& m,
                                         const Eigen::VectorXd& u_h,
                                         const EllipseSpec& e);

// Same program with C held fixed; reduces to a ratio over bound rows.
struct SubspaceRadius {
  double radius = 0.0;
  bool degenerate = false;  // C maps the subspace to zero everywhere
  int binding_row = -1;
};
SubspaceRadius authority_radius(const VehicleModel& m, const AllocationMatrix& alloc,
                                const Eigen::VectorXd& u_h, const Mat6& subspace_proj);
// Convenience form that derives the hover control internally.
SubspaceRadius authority_radius(const VehicleModel& m, const AllocationMatrix& alloc,
                                const Mat6& subspace_proj);

struct MinPowerResult {
  AllocationMatrix alloc;
  double max_avg_power = 0.0;
  int iterations = 0;
};

struct NonConvergence : std::runtime_error {
  explicit NonConvergence(const std::string& what) : std::runtime_error(what) {}
};

MinPowerResult min_power_allocation(const VehicleModel& m, const Eigen::VectorXd& u_h,
                                    const PowerModel& pm, int max_iters = 400);

// E|N(u_h_i, c Sigma c')|^{3/2}; thrust-to-power constant taken as 1.
double avg_power(const Vec6& c_row, double u_h_i, const Mat6& Sigma);

struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// Confluent hypergeometric 1F1(a, b, z); Kummer's transform for z < 0.
double hyp1f1(double a, double b, double z);

struct ConvexityReport {
  double min_second_difference = 0.0;
  double argmin = 0.0;
  bool convex = false;
  bool positive = false;
};

// f(x) = x^(-3/4) 1F1(-3/4, 1/2, -x) on a positive grid.
ConvexityReport convexity_check_f(const std::vector<double>& grid);

struct ReachableUnder {
  // {t : A (u_h + C t) <= b}, stored as rows G t <= w
  Eigen::MatrixXd G;
  Eigen::VectorXd w;
  bool member(const Vec6& t, double tol = 1e-9) const;
};

ReachableUnder reachable_under(const VehicleModel& m, const AllocationMatrix& alloc,
                               const Eigen::VectorXd& u_h);

struct ReachableGlobal {
  std::array<int, 3> axes{};
  Eigen::Vector3d center = Eigen::Vector3d::Zero();   // box-center image
  Eigen::Matrix3Xd generators;                        // scaled column images
  Eigen::Matrix3Xd vertex_cloud;                      // all 2^n projections
  Eigen::Matrix3Xd facet_normals;                     // unit rows; empty if flat
  Eigen::VectorXd facet_offsets;                      // max normal'x per facet
  int rank = 0;

  bool member(const Eigen::Vector3d& pt, double tol = 1e-7) const;
};

ReachableGlobal reachable_global(const VehicleModel& m, const std::array<int, 3>& axes);

// OFF mesh of the zonotope hull (rank-3 case).
std::string to_off(const ReachableGlobal& hull);

struct AllocateResult {
  Eigen::VectorXd u;
  double alpha = 1.0;
};

// u = u_h + alpha C (t_cmd - t_h) with the largest alpha in [0,1] keeping the
// control admissible.
AllocateResult allocate(const AllocationMatrix& alloc, const Vec6& t_cmd,
                        const VehicleModel& m, const Eigen::VectorXd& u_h,
                        const Vec6& t_h);

}  // namespace modrotor
