#include "modrotor/configopt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <queue>
#include <set>
#include <sstream>

#include "modrotor/frame.hpp"
#include "modrotor/socp.hpp"

namespace modrotor {

namespace {

bool lex_less(const Eigen::Vector3i& a, const Eigen::Vector3i& b) {
  if (a[0] != b[0]) return a[0] < b[0];
  if (a[1] != b[1]) return a[1] < b[1];
  return a[2] < b[2];
}

double choose(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= static_cast<double>(n - i) / (i + 1);
  return r;
}

std::string kind_name(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::TorqueAuthority: return "torque_authority";
    case ObjectiveKind::EllipseAuthority: return "ellipse_authority";
    case ObjectiveKind::StructuralBound: return "structural_bound";
  }
  return "?";
}

ObjectiveKind kind_from_name(const std::string& s) {
  if (s == "torque_authority") return ObjectiveKind::TorqueAuthority;
  if (s == "ellipse_authority") return ObjectiveKind::EllipseAuthority;
  if (s == "structural_bound") return ObjectiveKind::StructuralBound;
  throw std::invalid_argument("unknown objective kind: " + s);
}

Mat6 torque_block() {
  Mat6 Q = Mat6::Zero();
  Q.block<3, 3>(3, 3).setIdentity();
  return Q;
}

Mat6 effective_metric(const ObjectiveSpec& obj) {
  if (obj.kind == ObjectiveKind::TorqueAuthority || obj.Q.cwiseAbs().maxCoeff() <= 0.0)
    return torque_block();
  return obj.Q;
}

// Range projector and (Q^+)^{1/2} of a PSD 6x6.
void metric_roots(const Mat6& Q, Mat6& proj, Mat6& pinv_half) {
  Eigen::SelfAdjointEigenSolver<Mat6> eig(Q);
  proj.setZero();
  pinv_half.setZero();
  const double lmax = eig.eigenvalues().cwiseAbs().maxCoeff();
  for (int i = 0; i < 6; ++i) {
    const double l = eig.eigenvalues()[i];
    if (l > 1e-8 * std::max(lmax, 1e-300)) {
      const Vec6 v = eig.eigenvectors().col(i);
      proj += v * v.transpose();
      pinv_half += (1.0 / std::sqrt(l)) * v * v.transpose();
    }
  }
}

std::vector<int> orientation_list(const ObjectiveSpec& obj) {
  if (!obj.allowed_orientations.empty()) return obj.allowed_orientations;
  std::vector<int> all(20);
  for (int i = 0; i < 20; ++i) all[i] = i;
  return all;
}

std::vector<int> spin_list(const ObjectiveSpec& obj) {
  if (!obj.allowed_spins.empty()) return obj.allowed_spins;
  return {+1, -1};
}

double wake_radius_world(const ObjectiveSpec& obj) {
  if (obj.wake.radius > 0.0) return obj.wake.radius;
  const auto& model = canonical_model();
  return model.circumradius * obj.module_scale / model.edge_length;
}

}  // namespace

AdmissibleGraph build_graph(int n_modules) {
  if (n_modules < 1) throw std::invalid_argument("need at least one module");
  AdmissibleGraph g;
  g.depth = n_modules / 2;
  const auto& steps = lattice_neighbor_steps();

  std::set<std::array<int, 3>> seen;
  auto key = [](const Eigen::Vector3i& v) {
    return std::array<int, 3>{v[0], v[1], v[2]};
  };
  g.vertices.push_back(Eigen::Vector3i::Zero());
  seen.insert(key(g.vertices[0]));
  std::size_t frontier_begin = 0;
  for (int d = 0; d < g.depth; ++d) {
    const std::size_t frontier_end = g.vertices.size();
    for (std::size_t i = frontier_begin; i < frontier_end; ++i) {
      const Eigen::Vector3i base = g.vertices[i];
      for (const auto& s : steps) {
        const Eigen::Vector3i v = base + s;
        if (seen.insert(key(v)).second) g.vertices.push_back(v);
      }
    }
    frontier_begin = frontier_end;
  }
  for (std::size_t i = 0; i < g.vertices.size(); ++i)
    for (std::size_t j = i + 1; j < g.vertices.size(); ++j) {
      const Eigen::Vector3i d = g.vertices[j] - g.vertices[i];
      if (std::any_of(steps.begin(), steps.end(),
                      [&](const Eigen::Vector3i& s) { return s == d || s == -d; }))
        g.edges.push_back({static_cast<int>(i), static_cast<int>(j)});
    }
  return g;
}

bool wake_predicate(const Eigen::Vector3d& x, const Eigen::Vector3d& y,
                    const Eigen::Vector3d& eta, const WakeParams& params) {
  const Eigen::Vector3d n = eta.normalized();
  const double axial = (y - x).dot(n);  // how far x sits downstream of y
  if (axial <= 0.0) return false;
  if (axial >= params.length) return false;
  const Eigen::Vector3d d = x - y;
  const double radial = (d + axial * n).norm();
  return radial < params.radius;
}

int ConfigModel::var(const std::string& name) const {
  auto it = var_index.find(name);
  if (it == var_index.end()) throw std::out_of_range("no model variable " + name);
  return it->second;
}

namespace {

struct ModelBuilder {
  ConfigModel m;

  int add_var(const std::string& name, bool binary, double lb, double ub) {
    m.var_index.emplace(name, static_cast<int>(m.vars.size()));
    m.vars.push_back({name, binary, lb, ub});
    return static_cast<int>(m.vars.size()) - 1;
  }
  void add_row(const std::string& tag, std::vector<std::pair<int, double>> a,
               double lo, double hi) {
    m.rows.push_back({tag, std::move(a), lo, hi});
  }
};

}  // namespace

ConfigModel build_model(const AdmissibleGraph& g, int n, const ObjectiveSpec& objective) {
  const int N = static_cast<int>(g.vertices.size());
  if (n < 1) throw std::invalid_argument("module count must be positive");
  if (n > N) throw InfeasibleSkeleton("requested " + std::to_string(n) +
                                      " modules on a graph of " + std::to_string(N));
  const auto& model = canonical_model();
  const auto& basis = canonical_basis();
  const auto orientations = canonical_orientations(model);
  const double scale = objective.module_scale / model.edge_length;

  ModelBuilder b;
  b.m.graph = g;
  b.m.n = n;
  b.m.objective = objective;
  for (const auto& v : g.vertices)
    b.m.positions.push_back(scale * (basis.B * v.cast<double>()));

  const std::vector<int> O = orientation_list(objective);
  const std::vector<int> S = spin_list(objective);
  const double inf = std::numeric_limits<double>::infinity();

  // Position / orientation / spin / sink binaries, then flows and the offset.
  std::vector<int> beta(N), gamma(N);
  std::vector<std::vector<int>> beta_o(N), beta_s(N);
  for (int x = 0; x < N; ++x)
    beta[x] = b.add_var("beta[" + std::to_string(x) + "]", true, 0, 1);
  for (int x = 0; x < N; ++x)
    gamma[x] = b.add_var("gamma[" + std::to_string(x) + "]", true, 0, 1);
  for (int x = 0; x < N; ++x)
    for (int k : O)
      beta_o[x].push_back(b.add_var(
          "beta_o[" + std::to_string(x) + "][" + std::to_string(k) + "]", true, 0, 1));
  for (int x = 0; x < N; ++x)
    for (int s : S)
      beta_s[x].push_back(b.add_var(
          "beta_s[" + std::to_string(x) + "][" + (s > 0 ? std::string("+") : std::string("-")) + "]",
          true, 0, 1));

  std::vector<std::array<int, 2>> arcs;  // directed, both ways per edge
  std::vector<int> flow_var;
  for (const auto& e : g.edges) {
    for (int dir = 0; dir < 2; ++dir) {
      const int from = e[dir], to = e[1 - dir];
      arcs.push_back({from, to});
      flow_var.push_back(b.add_var(
          "flow[" + std::to_string(from) + "->" + std::to_string(to) + "]", false, 0, n));
    }
  }
  int zvar[3];
  double diameter = 1.0;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      diameter = std::max(diameter, (b.m.positions[i] - b.m.positions[j]).norm());
  for (int d = 0; d < 3; ++d)
    zvar[d] = b.add_var("z[" + std::to_string(d) + "]", false, -diameter, diameter);

  // Exactly one orientation and one spin per placed position.
  for (int x = 0; x < N; ++x) {
    std::vector<std::pair<int, double>> row;
    for (int v : beta_o[x]) row.emplace_back(v, 1.0);
    row.emplace_back(beta[x], -1.0);
    b.add_row("compatible-orientations", std::move(row), 0, 0);
  }
  for (int x = 0; x < N; ++x) {
    std::vector<std::pair<int, double>> row;
    for (int v : beta_s[x]) row.emplace_back(v, 1.0);
    row.emplace_back(beta[x], -1.0);
    b.add_row("compatible-directions", std::move(row), 0, 0);
  }
  {
    std::vector<std::pair<int, double>> row;
    for (int x = 0; x < N; ++x) row.emplace_back(beta[x], 1.0);
    b.add_row("cardinality", std::move(row), n, n);
  }
  for (int d = 0; d < 3; ++d) {
    std::vector<std::pair<int, double>> row;
    row.emplace_back(zvar[d], static_cast<double>(n));
    for (int x = 0; x < N; ++x) row.emplace_back(beta[x], b.m.positions[x][d]);
    b.add_row("offset", std::move(row), 0, 0);
  }

  // Contiguity: every placed position routes one unit of flow to the sink.
  {
    std::vector<std::pair<int, double>> row;
    for (int x = 0; x < N; ++x) row.emplace_back(gamma[x], 1.0);
    b.add_row("sink-unique", std::move(row), 1, 1);
  }
  for (int x = 0; x < N; ++x)
    b.add_row("sink-allocated", {{gamma[x], 1.0}, {beta[x], -1.0}}, -inf, 0);
  for (int x = 0; x < N; ++x) {
    std::vector<std::pair<int, double>> bal, cap;
    for (std::size_t a = 0; a < arcs.size(); ++a) {
      if (arcs[a][0] == x) {
        bal.emplace_back(flow_var[a], 1.0);
        cap.emplace_back(flow_var[a], 1.0);
      } else if (arcs[a][1] == x) {
        bal.emplace_back(flow_var[a], -1.0);
      }
    }
    bal.emplace_back(beta[x], -1.0);
    bal.emplace_back(gamma[x], static_cast<double>(n));
    b.add_row("contiguous-balance", std::move(bal), -inf, 0);
    cap.emplace_back(beta[x], -static_cast<double>(n - 1));
    b.add_row("contiguous-capacity", std::move(cap), -inf, 0);
  }

  // Wake exclusion rows over predicate-selected triples.
  if (objective.wake.enabled) {
    WakeParams wp = objective.wake;
    wp.radius = wake_radius_world(objective);
    for (int x = 0; x < N; ++x)
      for (int y = 0; y < N; ++y) {
        if (x == y) continue;
        for (std::size_t ki = 0; ki < O.size(); ++ki) {
          if (wake_predicate(b.m.positions[x], b.m.positions[y],
                             orientations[static_cast<std::size_t>(O[ki])].direction, wp))
            b.add_row("wake", {{beta[x], 1.0}, {beta_o[y][ki], 1.0}}, -inf, 1);
        }
      }
  }

  if (objective.kind != ObjectiveKind::StructuralBound) {
    // Allocation block. Coefficient bound from the single-module column set.
    Eigen::MatrixXd cols(6, 20);
    for (int k = 0; k < 20; ++k) {
      cols.col(k).head<3>() = objective.params.k_th * orientations[k].direction;
      cols.col(k).tail<3>() = objective.params.k_to * orientations[k].direction;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(cols);
    double smin = svd.singularValues()[0];
    for (int i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()[i] > 1e-8 * svd.singularValues()[0])
        smin = svd.singularValues()[i];
    b.m.big_m_c = 10.0 * n * objective.params.u_max / smin;
    const double M = b.m.big_m_c;

    std::vector<std::array<int, 6>> cvar(N);
    for (int x = 0; x < N; ++x)
      for (int q = 0; q < 6; ++q)
        cvar[x][q] = b.add_var(
            "c[" + std::to_string(x) + "][" + std::to_string(q) + "]", false, -M, M);
    // products beta_s * c (spin sign), then beta_o * c and beta_o * (signed c)
    std::vector<std::vector<std::array<int, 6>>> svar(N), pvar(N), ptvar(N);
    for (int x = 0; x < N; ++x) {
      svar[x].resize(S.size());
      for (std::size_t si = 0; si < S.size(); ++si)
        for (int q = 0; q < 6; ++q)
          svar[x][si][q] = b.add_var("cs[" + std::to_string(x) + "][" +
                                         (S[si] > 0 ? "+" : "-") + "][" + std::to_string(q) + "]",
                                     false, -M, M);
      pvar[x].resize(O.size());
      ptvar[x].resize(O.size());
      for (std::size_t ki = 0; ki < O.size(); ++ki)
        for (int q = 0; q < 6; ++q) {
          pvar[x][ki][q] = b.add_var("P[" + std::to_string(x) + "][" + std::to_string(O[ki]) +
                                         "][" + std::to_string(q) + "]",
                                     false, -M, M);
          ptvar[x][ki][q] = b.add_var("Pt[" + std::to_string(x) + "][" + std::to_string(O[ki]) +
                                          "][" + std::to_string(q) + "]",
                                      false, -M, M);
        }
    }
    const int s_obj = b.add_var("s", false, 0, inf);

    // big-M product rows: P = beta_o * c, cs = beta_s * c, Pt = beta_o * (signed c)
    auto product_rows = [&](const std::string& tag, int prod, int bin,
                            std::vector<std::pair<int, double>> expr, double bound) {
      b.add_row(tag, {{prod, 1.0}, {bin, -bound}}, -inf, 0);
      b.add_row(tag, {{prod, -1.0}, {bin, -bound}}, -inf, 0);
      {
        auto row = expr;
        for (auto& t : row) t.second = -t.second;
        row.emplace_back(prod, 1.0);
        row.emplace_back(bin, bound);
        b.add_row(tag, std::move(row), -inf, bound);
      }
      {
        auto row = std::move(expr);
        row.emplace_back(prod, -1.0);
        row.emplace_back(bin, bound);
        b.add_row(tag, std::move(row), -inf, bound);
      }
    };
    for (int x = 0; x < N; ++x)
      for (int q = 0; q < 6; ++q) {
        for (std::size_t si = 0; si < S.size(); ++si)
          product_rows("bigM-spin", svar[x][si][q], beta_s[x][si], {{cvar[x][q], 1.0}}, M);
        for (std::size_t ki = 0; ki < O.size(); ++ki) {
          product_rows("bigM-orient", pvar[x][ki][q], beta_o[x][ki], {{cvar[x][q], 1.0}}, M);
          // signed row: sum_s sign(s) * cs[x][s][q]
          std::vector<std::pair<int, double>> signed_c;
          for (std::size_t si = 0; si < S.size(); ++si)
            signed_c.emplace_back(svar[x][si][q], S[si] > 0 ? 1.0 : -1.0);
          product_rows("bigM-orient-spin", ptvar[x][ki][q], beta_o[x][ki],
                       std::move(signed_c), M);
        }
      }
    // unplaced rows of C vanish
    for (int x = 0; x < N; ++x)
      for (int q = 0; q < 6; ++q) {
        b.add_row("c-bound", {{cvar[x][q], 1.0}, {beta[x], -M}}, -inf, 0);
        b.add_row("c-bound", {{cvar[x][q], -1.0}, {beta[x], -M}}, -inf, 0);
      }

    // Actuation equalities against the fixed target projector. The torque
    // rows use the thrust identity to keep the offset coupling linear:
    // sum_x (x + z) x f_x = sum_x x x f_x + z x (thrust block).
    const Mat6& H = objective.H_target;
    for (int r = 0; r < 3; ++r)
      for (int q = 0; q < 6; ++q) {
        std::vector<std::pair<int, double>> row;
        for (int x = 0; x < N; ++x)
          for (std::size_t ki = 0; ki < O.size(); ++ki) {
            const double coef =
                objective.params.k_th * orientations[static_cast<std::size_t>(O[ki])].direction[r];
            if (coef != 0.0) row.emplace_back(pvar[x][ki][q], coef);
          }
        b.add_row("thrust", std::move(row), H(r, q), H(r, q));
      }
    for (int r = 0; r < 3; ++r)
      for (int q = 0; q < 6; ++q) {
        std::vector<std::pair<int, double>> row;
        for (int x = 0; x < N; ++x)
          for (std::size_t ki = 0; ki < O.size(); ++ki) {
            const Vec3 eta = orientations[static_cast<std::size_t>(O[ki])].direction;
            const Vec3 arm = b.m.positions[x].cross(eta);
            if (arm[r] != 0.0)
              row.emplace_back(pvar[x][ki][q], objective.params.k_th * arm[r]);
            if (eta[r] != 0.0)
              row.emplace_back(ptvar[x][ki][q], objective.params.k_to * eta[r]);
          }
        // z x H_top column q, component r
        const Vec3 hq = H.block<3, 1>(0, q);
        for (int d = 0; d < 3; ++d) {
          const Vec3 ed = Vec3::Unit(d);
          const double coef = ed.cross(hq)[r];
          if (coef != 0.0) row.emplace_back(zvar[d], coef);
        }
        b.add_row("torque", std::move(row), H(3 + r, q), H(3 + r, q));
      }
    const Mat6 HmI = H - Mat6::Identity();
    for (int x = 0; x < N; ++x)
      for (int p = 0; p < 6; ++p) {
        std::vector<std::pair<int, double>> row;
        for (int q = 0; q < 6; ++q)
          if (HmI(q, p) != 0.0) row.emplace_back(cvar[x][q], HmI(q, p));
        if (!row.empty()) b.add_row("properness", std::move(row), 0, 0);
      }

    // Authority cones per bound row of every potential module.
    Mat6 proj, pinv_half;
    metric_roots(effective_metric(objective), proj, pinv_half);
    for (int x = 0; x < N; ++x) {
      for (int side = 0; side < 2; ++side) {
        const double headroom = side == 0 ? objective.params.u_max - objective.hover_u
                                          : objective.hover_u - objective.params.u_min;
        ConicRow cone;
        cone.tag = "authority";
        for (int r = 0; r < 6; ++r) {
          std::vector<std::pair<int, double>> frow;
          for (int q = 0; q < 6; ++q)
            if (pinv_half(r, q) != 0.0) frow.emplace_back(cvar[x][q], pinv_half(r, q));
          cone.F.push_back(std::move(frow));
          cone.g.push_back(0.0);
        }
        cone.h = {{s_obj, headroom}};
        cone.d = 0.0;
        b.m.soc_rows.push_back(std::move(cone));
      }
    }
    b.m.objective_terms = {{s_obj, 1.0}};
    b.m.maximize = false;
  } else {
    // Structural block: union joints over every potential module position,
    // per-position stiffness contributions gated by placement binaries.
    const double merge_tol = 1e-6 * objective.module_scale;
    std::vector<Eigen::Vector3d> joints;
    std::vector<std::array<int, 20>> jmap(N);
    for (int x = 0; x < N; ++x)
      for (int k = 0; k < 20; ++k) {
        const Eigen::Vector3d p = b.m.positions[x] + scale * model.vertices[k];
        int id = -1;
        for (std::size_t j = 0; j < joints.size(); ++j)
          if ((joints[j] - p).norm() < merge_tol) {
            id = static_cast<int>(j);
            break;
          }
        if (id < 0) {
          joints.push_back(p);
          id = static_cast<int>(joints.size()) - 1;
        }
        jmap[x][k] = id;
      }
    const int njt = static_cast<int>(joints.size());
    b.m.big_m_w = 1e3;
    const double Mw = b.m.big_m_w;

    std::vector<int> wvar(6 * njt);
    for (int j = 0; j < njt; ++j)
      for (int d = 0; d < 6; ++d)
        wvar[6 * j + d] = b.add_var(
            "w[" + std::to_string(j) + "][" + std::to_string(d) + "]", false, -Mw, Mw);
    const int lambda = b.add_var("lambda", false, 0, inf);

    // One module's stiffness in its own 120-dof ordering.
    SpaceFrame single;
    single.joints.resize(3, 20);
    for (int k = 0; k < 20; ++k) single.joints.col(k) = scale * model.vertices[k];
    for (const auto& e : model.edges) {
      single.members.push_back({e[0], e[1]});
      single.member_module.push_back(0);
    }
    single.member_length = objective.module_scale;
    const Eigen::MatrixXd K1 = assemble_stiffness(single, BeamSection{}).K;

    std::vector<std::array<int, 120>> Wvar(N);
    for (int x = 0; x < N; ++x)
      for (int k = 0; k < 20; ++k)
        for (int d = 0; d < 6; ++d) {
          const int lv = 6 * k + d;
          Wvar[x][lv] = b.add_var("W[" + std::to_string(x) + "][" + std::to_string(lv) + "]",
                                  false, -Mw, Mw);
          // W = beta_x * w at the matching union dof
          const int wv = wvar[6 * jmap[x][k] + d];
          b.add_row("bigM-stiffness", {{Wvar[x][lv], 1.0}, {beta[x], -Mw}}, -inf, 0);
          b.add_row("bigM-stiffness", {{Wvar[x][lv], -1.0}, {beta[x], -Mw}}, -inf, 0);
          b.add_row("bigM-stiffness", {{Wvar[x][lv], 1.0}, {wv, -1.0}, {beta[x], Mw}}, -inf, Mw);
          b.add_row("bigM-stiffness", {{Wvar[x][lv], -1.0}, {wv, 1.0}, {beta[x], Mw}}, -inf, Mw);
        }

    // Load: a balanced vertical dipole on the origin module's polar joints.
    Eigen::VectorXd load = Eigen::VectorXd::Zero(6 * njt);
    load[6 * jmap[0][0] + 2] = 1.0;
    load[6 * jmap[0][19] + 2] = -1.0;

    // K(beta) w = c, assembled sparse per union dof.
    std::vector<std::vector<std::pair<int, double>>> stiff_rows(6 * njt);
    for (int x = 0; x < N; ++x)
      for (int k = 0; k < 20; ++k)
        for (int d = 0; d < 6; ++d) {
          const int gr = 6 * jmap[x][k] + d;
          const int lr = 6 * k + d;
          for (int lc = 0; lc < 120; ++lc) {
            const double v = K1(lr, lc);
            if (v != 0.0) stiff_rows[gr].emplace_back(Wvar[x][lc], v);
          }
        }
    for (int gr = 0; gr < 6 * njt; ++gr)
      b.add_row("stiffness", std::move(stiff_rows[gr]), load[gr], load[gr]);

    ConicRow cone;
    cone.tag = "displacement-bound";
    for (int j = 0; j < 6 * njt; ++j) {
      cone.F.push_back({{wvar[j], 1.0}});
      cone.g.push_back(0.0);
    }
    cone.h = {{lambda, 1.0}};
    cone.d = 0.0;
    b.m.soc_rows.push_back(std::move(cone));
    b.m.objective_terms = {{lambda, 1.0}};
    b.m.maximize = false;
  }
  return b.m;
}

bool subset_connected(const AdmissibleGraph& g, const std::vector<int>& subset) {
  if (subset.empty()) return false;
  std::set<int> in(subset.begin(), subset.end());
  std::set<int> seen{subset[0]};
  std::queue<int> bfs;
  bfs.push(subset[0]);
  while (!bfs.empty()) {
    const int v = bfs.front();
    bfs.pop();
    for (const auto& e : g.edges) {
      int other = -1;
      if (e[0] == v) other = e[1];
      else if (e[1] == v) other = e[0];
      if (other >= 0 && in.count(other) && !seen.count(other)) {
        seen.insert(other);
        bfs.push(other);
      }
    }
  }
  return seen.size() == in.size();
}

bool flow_feasible(const AdmissibleGraph& g, const std::vector<int>& subset, int n) {
  // Max-flow check with the sink on the first allocated vertex: every other
  // allocated vertex must push one unit to it through allocated vertices.
  if (subset.size() <= 1) return n == static_cast<int>(subset.size());
  std::set<int> in(subset.begin(), subset.end());
  const int sink = subset[0];
  std::map<int, int> local;
  for (std::size_t i = 0; i < subset.size(); ++i) local[subset[i]] = static_cast<int>(i);
  const int V = static_cast<int>(subset.size()) + 1;  // + super source
  const int src = V - 1;
  Eigen::MatrixXd cap = Eigen::MatrixXd::Zero(V, V);
  for (const auto& e : g.edges)
    if (in.count(e[0]) && in.count(e[1])) {
      cap(local[e[0]], local[e[1]]) = n;
      cap(local[e[1]], local[e[0]]) = n;
    }
  for (int id : subset)
    if (id != sink) cap(src, local[id]) = 1.0;

  double flow = 0.0;
  while (true) {  // BFS augmenting paths
    std::vector<int> parent(V, -1);
    parent[src] = src;
    std::queue<int> bfs;
    bfs.push(src);
    while (!bfs.empty() && parent[local[sink]] < 0) {
      const int u = bfs.front();
      bfs.pop();
      for (int v = 0; v < V; ++v)
        if (parent[v] < 0 && cap(u, v) > 0.5) {
          parent[v] = u;
          bfs.push(v);
        }
    }
    if (parent[local[sink]] < 0) break;
    for (int v = local[sink]; v != src; v = parent[v]) {
      cap(parent[v], v) -= 1.0;
      cap(v, parent[v]) += 1.0;
    }
    flow += 1.0;
  }
  return flow >= static_cast<double>(subset.size()) - 1.0 - 0.5 &&
         n == static_cast<int>(subset.size());
}

bool flow_lp_feasible(const AdmissibleGraph& g, const std::vector<int>& subset, int n) {
  if (subset.size() <= 1) return n == static_cast<int>(subset.size());
  std::set<int> in(subset.begin(), subset.end());
  const int sink = subset[0];

  std::vector<std::array<int, 2>> arcs;
  for (const auto& e : g.edges) {
    if (!in.count(e[0]) || !in.count(e[1])) continue;
    arcs.push_back({e[0], e[1]});
    arcs.push_back({e[1], e[0]});
  }
  SocpProblem p;
  p.num_vars = static_cast<int>(arcs.size());
  p.objective = Eigen::VectorXd::Zero(p.num_vars);
  for (int i = 0; i < p.num_vars; ++i) p.box_constraints.emplace_back(0.0, n);
  for (int x : subset) {
    Eigen::VectorXd bal = Eigen::VectorXd::Zero(p.num_vars);
    Eigen::VectorXd cap = Eigen::VectorXd::Zero(p.num_vars);
    for (std::size_t a = 0; a < arcs.size(); ++a) {
      if (arcs[a][0] == x) {
        bal[static_cast<Eigen::Index>(a)] = 1.0;
        cap[static_cast<Eigen::Index>(a)] = 1.0;
      } else if (arcs[a][1] == x) {
        bal[static_cast<Eigen::Index>(a)] = -1.0;
      }
    }
    p.add_linear(bal, 1.0 - (x == sink ? static_cast<double>(n) : 0.0));
    p.add_linear(cap, static_cast<double>(n - 1));
  }
  const SocpSolution sol = solve(p);
  if (sol.status == SocpStatus::Optimal) return true;
  if (sol.status == SocpStatus::Infeasible) return false;
  throw SolverFailure("flow LP returned " + to_string(sol.status));
}

namespace {

struct InnerEval {
  bool feasible = false;
  double objective = 0.0;
  Eigen::MatrixXd C;
  Eigen::Vector3d z = Eigen::Vector3d::Zero();
};

bool wake_clear(const ConfigModel& model, const std::vector<int>& ids,
                const std::vector<int>& orients) {
  if (!model.objective.wake.enabled) return true;
  WakeParams wp = model.objective.wake;
  wp.radius = wake_radius_world(model.objective);
  const auto orientations = canonical_orientations(canonical_model());
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < ids.size(); ++j) {
      if (i == j) continue;
      if (wake_predicate(model.positions[static_cast<std::size_t>(ids[i])],
                         model.positions[static_cast<std::size_t>(ids[j])],
                         orientations[static_cast<std::size_t>(orients[j])].direction, wp))
        return false;
    }
  return true;
}

InnerEval evaluate_candidate(const ConfigModel& model, const std::vector<int>& ids,
                             const std::vector<int>& orients, const std::vector<int>& spins) {
  InnerEval out;
  if (!wake_clear(model, ids, orients)) return out;
  std::vector<ModulePlacement> placements;
  for (std::size_t i = 0; i < ids.size(); ++i)
    placements.push_back({model.graph.vertices[static_cast<std::size_t>(ids[i])],
                          orients[i], spins[i]});
  Configuration config;
  try {
    config = make_configuration(placements, model.objective.module_scale);
  } catch (const std::exception&) {
    return out;
  }
  out.z = config.offset;

  if (model.objective.kind == ObjectiveKind::StructuralBound) {
    try {
      const StiffnessSystem sys = assemble_stiffness(build_frame(config), BeamSection{});
      out.objective = max_compliance(sys).sigma1;
      out.feasible = true;
    } catch (const std::exception&) {
    }
    return out;
  }

  try {
    const VehicleModel m = assemble_vehicle(config, model.objective.params);
    const Mat6 Q = effective_metric(model.objective);
    Mat6 qproj, qpinv_half;
    metric_roots(Q, qproj, qpinv_half);
    const Mat6 H = projector(m.M_tt);
    if (((Mat6::Identity() - H) * qproj).cwiseAbs().maxCoeff() > 1e-8)
      return out;  // metric subspace not reachable by this candidate
    const Eigen::VectorXd u_h =
        Eigen::VectorXd::Constant(m.n, model.objective.hover_u);
    const AuthorityResult res = max_authority_allocation(m, u_h, ellipse_from(Q));
    out.objective = res.radius;
    out.C = res.alloc.C;
    out.feasible = true;
  } catch (const std::exception&) {
  }
  return out;
}

std::vector<int> canonical_candidates(const AdmissibleGraph& g) {
  std::vector<int> out;
  for (std::size_t i = 0; i < g.vertices.size(); ++i)
    if (lex_less(Eigen::Vector3i::Zero(), g.vertices[i])) out.push_back(static_cast<int>(i));
  return out;
}

// Runs fn over every orientation/spin assignment from the model's allowed
// lists; returns false if fn never succeeded. Structural objectives are
// orientation-independent and short-circuit after the first wake-clear pick.
template <typename Fn>
void for_each_assignment(const ConfigModel& model, const std::vector<int>& ids,
                         long long& evaluations, Fn&& fn) {
  const std::vector<int> O = orientation_list(model.objective);
  const std::vector<int> S = spin_list(model.objective);
  const std::size_t n = ids.size();
  const bool structural = model.objective.kind == ObjectiveKind::StructuralBound;

  std::vector<std::size_t> oc(n, 0), sc(n, 0);
  while (true) {
    std::vector<int> orients(n), spins(n);
    for (std::size_t i = 0; i < n; ++i) {
      orients[i] = O[oc[i]];
      spins[i] = S[sc[i]];
    }
    ++evaluations;
    const bool done = fn(orients, spins);
    if (done && structural) return;

    // mixed-radix increment over (spins, orientations)
    std::size_t i = 0;
    for (; i < n; ++i) {
      if (++sc[i] < S.size()) break;
      sc[i] = 0;
    }
    if (i < n) continue;
    for (i = 0; i < n; ++i) {
      if (++oc[i] < O.size()) break;
      oc[i] = 0;
    }
    if (i == n) return;
  }
}

Assignment make_assignment(const std::vector<int>& ids, const std::vector<int>& orients,
                           const std::vector<int>& spins, const InnerEval& ev) {
  Assignment a;
  a.vertex_ids = ids;
  a.orientations = orients;
  a.spins = spins;
  a.C = ev.C;
  a.z = ev.z;
  a.objective = ev.objective;
  return a;
}

bool better(const ConfigModel& model, double cand, double best) {
  if (model.objective.kind == ObjectiveKind::StructuralBound) return cand < best;
  return cand > best;
}

}  // namespace

SolveResult solve_exhaustive(const ConfigModel& model, const SolveLimits& limits) {
  const int n = model.n;
  const int N = static_cast<int>(model.graph.vertices.size());
  if (n > N) throw SearchTooLarge("more modules than graph vertices");
  const std::vector<int> cands = canonical_candidates(model.graph);
  const std::vector<int> O = orientation_list(model.objective);
  const std::vector<int> S = spin_list(model.objective);

  double leaves = choose(static_cast<int>(cands.size()), n - 1);
  if (model.objective.kind != ObjectiveKind::StructuralBound)
    leaves *= std::pow(static_cast<double>(O.size()), n) *
              std::pow(static_cast<double>(S.size()), n);
  if (leaves > static_cast<double>(limits.max_leaves))
    throw SearchTooLarge("estimated " + std::to_string(leaves) + " leaf evaluations");

  SolveResult res;
  res.status = SolveStatus::Infeasible;
  bool found = false;
  double best = 0.0;
  Assignment best_a;

  std::vector<int> pick(static_cast<std::size_t>(std::max(0, n - 1)));
  std::vector<int> ids;
  // combinations of n-1 canonical candidates joined with the origin
  std::function<void(std::size_t, std::size_t)> combos = [&](std::size_t start,
                                                             std::size_t depth) {
    if (depth == pick.size()) {
      ids.assign(1, 0);
      for (int c : pick) ids.push_back(c);
      if (!subset_connected(model.graph, ids)) return;
      for_each_assignment(model, ids, res.evaluations,
                          [&](const std::vector<int>& orients, const std::vector<int>& spins) {
                            const InnerEval ev = evaluate_candidate(model, ids, orients, spins);
                            if (ev.feasible && (!found || better(model, ev.objective, best))) {
                              found = true;
                              best = ev.objective;
                              best_a = make_assignment(ids, orients, spins, ev);
                            }
                            return ev.feasible;
                          });
      return;
    }
    for (std::size_t i = start; i < cands.size(); ++i) {
      pick[depth] = cands[i];
      combos(i + 1, depth + 1);
    }
  };
  if (n == 1) {
    ids = {0};
    for_each_assignment(model, ids, res.evaluations,
                        [&](const std::vector<int>& orients, const std::vector<int>& spins) {
                          const InnerEval ev = evaluate_candidate(model, ids, orients, spins);
                          if (ev.feasible && (!found || better(model, ev.objective, best))) {
                            found = true;
                            best = ev.objective;
                            best_a = make_assignment(ids, orients, spins, ev);
                          }
                          return ev.feasible;
                        });
  } else {
    combos(0, 0);
  }

  if (found) {
    const VerifyReport rep = verify_assignment(model, best_a);
    if (!rep.pass) throw SolverFailure("exhaustive optimum failed verification");
    res.status = SolveStatus::Optimal;
    res.best = best_a;
    res.objective = best;
    res.bound_gap = 0.0;
  }
  return res;
}

SolveResult solve_branch_and_bound(const ConfigModel& model, const SolveLimits& limits,
                                   const Assignment* warm_start) {
  const int n = model.n;
  const std::vector<int> cands = canonical_candidates(model.graph);
  const auto t0 = std::chrono::steady_clock::now();
  const bool structural = model.objective.kind == ObjectiveKind::StructuralBound;

  // A cheap valid bound for the authority objectives: no completion can beat
  // the sum of every module's largest torque contribution. Leaf nodes are
  // bounded exactly by the inner cone program itself.
  double root_bound;
  if (structural) {
    root_bound = 0.0;
  } else {
    double diameter = 0.0;
    for (std::size_t i = 0; i < model.positions.size(); ++i)
      for (std::size_t j = i + 1; j < model.positions.size(); ++j)
        diameter = std::max(diameter, (model.positions[i] - model.positions[j]).norm());
    const double headroom = std::min(model.objective.params.u_max - model.objective.hover_u,
                                     model.objective.hover_u - model.objective.params.u_min);
    root_bound = n * headroom *
                 (model.objective.params.k_to + model.objective.params.k_th * diameter);
  }

  SolveResult res;
  res.status = SolveStatus::Optimal;
  bool found = false;
  double best = 0.0;
  Assignment best_a;
  if (warm_start) {
    const VerifyReport rep = verify_assignment(model, *warm_start);
    if (rep.pass) {
      found = true;
      best = warm_start->objective;
      best_a = *warm_start;
    }
  }

  bool stopped = false;
  std::vector<int> chosen;
  std::function<void(std::size_t)> dfs = [&](std::size_t next) {
    if (stopped) return;
    ++res.nodes;
    if (res.nodes > limits.node_limit) {
      res.status = SolveStatus::NodeLimit;
      stopped = true;
      return;
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (elapsed > limits.time_limit_s) {
      res.status = SolveStatus::TimeLimit;
      stopped = true;
      return;
    }
    // bound pruning (conservative at interior nodes)
    if (found) {
      if (!structural && root_bound <= best) return;
      if (structural && 0.0 >= best) return;
    }
    if (static_cast<int>(chosen.size()) == n - 1 || n == 1) {
      std::vector<int> ids{0};
      for (int c : chosen) ids.push_back(c);
      if (!subset_connected(model.graph, ids)) return;
      for_each_assignment(model, ids, res.evaluations,
                          [&](const std::vector<int>& orients, const std::vector<int>& spins) {
                            const InnerEval ev = evaluate_candidate(model, ids, orients, spins);
                            if (ev.feasible && (!found || better(model, ev.objective, best))) {
                              found = true;
                              best = ev.objective;
                              best_a = make_assignment(ids, orients, spins, ev);
                            }
                            return ev.feasible;
                          });
      return;
    }
    const int remaining = static_cast<int>(cands.size() - next);
    if (static_cast<int>(chosen.size()) + remaining < n - 1) return;  // cannot finish
    // branch: include cands[next], then exclude it
    chosen.push_back(cands[next]);
    dfs(next + 1);
    chosen.pop_back();
    dfs(next + 1);
  };
  if (n - 1 <= static_cast<int>(cands.size())) dfs(0);

  if (found) {
    const VerifyReport rep = verify_assignment(model, best_a);
    if (!rep.pass) throw SolverFailure("incumbent failed verification");
    res.best = best_a;
    res.objective = best;
    res.bound_gap = res.status == SolveStatus::Optimal
                        ? 0.0
                        : std::abs((structural ? best : root_bound) - best);
  } else if (res.status == SolveStatus::Optimal) {
    res.status = SolveStatus::Infeasible;
  }
  return res;
}

VerifyReport verify_assignment(const ConfigModel& model, const Assignment& a, double tol) {
  VerifyReport rep;
  auto add = [&](const std::string& tag, bool ok) { rep.checks.emplace_back(tag, ok); };

  const std::size_t n = a.vertex_ids.size();
  bool ids_ok = static_cast<int>(n) == model.n;
  {
    std::set<int> uniq(a.vertex_ids.begin(), a.vertex_ids.end());
    ids_ok = ids_ok && uniq.size() == n;
    for (int id : a.vertex_ids)
      ids_ok = ids_ok && id >= 0 && id < static_cast<int>(model.graph.vertices.size());
  }
  add("cardinality", ids_ok);

  const std::vector<int> O = orientation_list(model.objective);
  bool orients_ok = a.orientations.size() == n;
  for (int k : a.orientations)
    orients_ok = orients_ok && std::count(O.begin(), O.end(), k) == 1;
  add("compatible-orientations", orients_ok);

  const std::vector<int> S = spin_list(model.objective);
  bool spins_ok = a.spins.size() == n;
  for (int s : a.spins) spins_ok = spins_ok && std::count(S.begin(), S.end(), s) == 1;
  add("compatible-directions", spins_ok);

  if (!ids_ok || !orients_ok || !spins_ok) {
    rep.pass = false;
    return rep;
  }

  add("contiguous", subset_connected(model.graph, a.vertex_ids));
  if (model.objective.wake.enabled)
    add("wake", wake_clear(model, a.vertex_ids, a.orientations));

  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (int id : a.vertex_ids) mean += model.positions[static_cast<std::size_t>(id)];
  mean /= static_cast<double>(n);
  add("offset", (a.z + mean).norm() <= tol * (1.0 + mean.norm()));

  std::vector<ModulePlacement> placements;
  for (std::size_t i = 0; i < n; ++i)
    placements.push_back({model.graph.vertices[static_cast<std::size_t>(a.vertex_ids[i])],
                          a.orientations[i], a.spins[i]});
  try {
    const Configuration config = make_configuration(placements, model.objective.module_scale);
    if (model.objective.kind == ObjectiveKind::StructuralBound) {
      const StiffnessSystem sys = assemble_stiffness(build_frame(config), BeamSection{});
      const double sigma1 = max_compliance(sys).sigma1;
      add("displacement-bound",
          std::isfinite(a.objective) && std::abs(sigma1 - a.objective) <= tol * (1.0 + sigma1));
    } else {
      const VehicleModel m = assemble_vehicle(config, model.objective.params);
      const Mat6 H = projector(m.M_tt);
      bool act_ok = a.C.rows() == static_cast<Eigen::Index>(n) && a.C.cols() == 6;
      bool proper_ok = act_ok;
      if (act_ok) {
        act_ok = (m.M_tt * a.C - H).cwiseAbs().maxCoeff() <= tol;
        proper_ok = (a.C * H - a.C).cwiseAbs().maxCoeff() <= tol;
      }
      add("actuation", act_ok);
      add("properness", proper_ok);

      bool soc_ok = act_ok && std::isfinite(a.objective) && a.objective > 0.0;
      if (soc_ok) {
        const AllocationMatrix alloc{a.C, H, AllocationMethod::MaxAuthority};
        const Eigen::VectorXd u_h =
            Eigen::VectorXd::Constant(m.n, model.objective.hover_u);
        const SubspaceRadius r =
            authority_radius(m, alloc, u_h, effective_metric(model.objective));
        soc_ok = !r.degenerate && std::abs(r.radius - a.objective) <= tol * (1.0 + r.radius);
      }
      add("authority", soc_ok);
    }
  } catch (const std::exception&) {
    add(model.objective.kind == ObjectiveKind::StructuralBound ? "displacement-bound"
                                                               : "actuation",
        false);
  }

  rep.pass = std::all_of(rep.checks.begin(), rep.checks.end(),
                         [](const auto& c) { return c.second; });
  return rep;
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::NodeLimit: return "node_limit";
    case SolveStatus::TimeLimit: return "time_limit";
  }
  return "?";
}

namespace {

void print_num(std::ostringstream& os, double v) {
  if (std::isinf(v)) {
    os << (v > 0 ? "inf" : "-inf");
    return;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

double read_num(std::istream& is) {
  std::string tok;
  is >> tok;
  if (tok == "inf") return std::numeric_limits<double>::infinity();
  if (tok == "-inf") return -std::numeric_limits<double>::infinity();
  return std::stod(tok);
}

}  // namespace

std::string model_to_text(const ConfigModel& model) {
  std::ostringstream os;
  os << "MODROTOR-MIP 1\n";
  os << "META n " << model.n << " kind " << kind_name(model.objective.kind) << " sense MIN";
  os << " bigM_c ";
  print_num(os, model.big_m_c);
  os << " bigM_w ";
  print_num(os, model.big_m_w);
  os << "\n";
  os << "VARS " << model.vars.size() << "\n";
  for (const auto& v : model.vars) {
    os << v.name << " " << (v.binary ? "B" : "C") << " ";
    print_num(os, v.lb);
    os << " ";
    print_num(os, v.ub);
    os << "\n";
  }
  os << "ROWS " << model.rows.size() << "\n";
  for (const auto& r : model.rows) {
    os << r.tag << " ";
    print_num(os, r.lo);
    os << " ";
    print_num(os, r.hi);
    os << " " << r.a.size();
    for (const auto& [idx, coef] : r.a) {
      os << " " << idx << " ";
      print_num(os, coef);
    }
    os << "\n";
  }
  os << "SOC " << model.soc_rows.size() << "\n";
  for (const auto& c : model.soc_rows) {
    os << c.tag << " ";
    print_num(os, c.d);
    os << " " << c.h.size();
    for (const auto& [idx, coef] : c.h) {
      os << " " << idx << " ";
      print_num(os, coef);
    }
    os << " " << c.F.size() << "\n";
    for (std::size_t r = 0; r < c.F.size(); ++r) {
      print_num(os, c.g[r]);
      os << " " << c.F[r].size();
      for (const auto& [idx, coef] : c.F[r]) {
        os << " " << idx << " ";
        print_num(os, coef);
      }
      os << "\n";
    }
  }
  os << "OBJ " << model.objective_terms.size();
  for (const auto& [idx, coef] : model.objective_terms) {
    os << " " << idx << " ";
    print_num(os, coef);
  }
  os << "\nEND\n";
  return os.str();
}

void export_model(const ConfigModel& model, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << model_to_text(model);
  if (!f) throw std::runtime_error("write failed: " + path);
}

ConfigModel parse_model_text(const std::string& text) {
  std::istringstream is(text);
  std::string tok;
  is >> tok;
  if (tok != "MODROTOR-MIP") throw std::runtime_error("not a model file");
  int version;
  is >> version;
  if (version != 1) throw std::runtime_error("unsupported model version");

  ConfigModel m;
  is >> tok;  // META
  is >> tok >> m.n;
  is >> tok;  // kind
  std::string kind;
  is >> kind;
  m.objective.kind = kind_from_name(kind);
  is >> tok >> tok;  // sense MIN
  is >> tok;
  m.big_m_c = read_num(is);
  is >> tok;
  m.big_m_w = read_num(is);

  std::size_t count;
  is >> tok >> count;  // VARS
  for (std::size_t i = 0; i < count; ++i) {
    ModelVariable v;
    std::string kindc;
    is >> v.name >> kindc;
    v.binary = kindc == "B";
    v.lb = read_num(is);
    v.ub = read_num(is);
    m.var_index.emplace(v.name, static_cast<int>(m.vars.size()));
    m.vars.push_back(std::move(v));
  }
  is >> tok >> count;  // ROWS
  for (std::size_t i = 0; i < count; ++i) {
    LinearRow r;
    is >> r.tag;
    r.lo = read_num(is);
    r.hi = read_num(is);
    std::size_t nnz;
    is >> nnz;
    for (std::size_t k = 0; k < nnz; ++k) {
      int idx;
      is >> idx;
      r.a.emplace_back(idx, read_num(is));
    }
    m.rows.push_back(std::move(r));
  }
  is >> tok >> count;  // SOC
  for (std::size_t i = 0; i < count; ++i) {
    ConicRow c;
    is >> c.tag;
    c.d = read_num(is);
    std::size_t hn;
    is >> hn;
    for (std::size_t k = 0; k < hn; ++k) {
      int idx;
      is >> idx;
      c.h.emplace_back(idx, read_num(is));
    }
    std::size_t nrows;
    is >> nrows;
    for (std::size_t r = 0; r < nrows; ++r) {
      c.g.push_back(read_num(is));
      std::size_t nnz;
      is >> nnz;
      std::vector<std::pair<int, double>> frow;
      for (std::size_t k = 0; k < nnz; ++k) {
        int idx;
        is >> idx;
        frow.emplace_back(idx, read_num(is));
      }
      c.F.push_back(std::move(frow));
    }
    m.soc_rows.push_back(std::move(c));
  }
  is >> tok >> count;  // OBJ
  for (std::size_t i = 0; i < count; ++i) {
    int idx;
    is >> idx;
    m.objective_terms.emplace_back(idx, read_num(is));
  }
  is >> tok;
  if (tok != "END") throw std::runtime_error("truncated model file");
  return m;
}

ConfigModel parse_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_model_text(ss.str());
}

}  // namespace modrotor
