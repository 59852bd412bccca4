#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "modrotor/allocation.hpp"
#include "modrotor/config_io.hpp"
#include "modrotor/configopt.hpp"
#include "modrotor/dynamics.hpp"
#include "modrotor/fixtures.hpp"
#include "modrotor/frame.hpp"
#include "modrotor/geometry.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace modrotor;

namespace {

// All floating output is rounded to nine significant digits.
double sig9(double v) {
  if (!std::isfinite(v)) return v;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::strtod(buf, nullptr);
}

ordered_json vec_json(const Eigen::VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(sig9(v[i]));
  return a;
}

ordered_json mat_json(const Eigen::MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(sig9(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigParseError("cannot open " + path);
  try {
    return ordered_json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigParseError(path + ": " + e.what());
  }
}

Eigen::MatrixXd matrix_from_json(const ordered_json& j, Eigen::Index rows,
                                 Eigen::Index cols, const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw ConfigParseError(what + " must be a " + std::to_string(rows) + "x" +
                           std::to_string(cols) + " array");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ConfigParseError(what + " must be a " + std::to_string(rows) + "x" +
                             std::to_string(cols) + " array");
    for (Eigen::Index k = 0; k < cols; ++k)
      m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

struct CommonOpts {
  std::string params_path, section_path, q_path, sigma_path, objective_path;
  std::string out_dir;
  std::string method = "pinv";
  int threads = 1;
  long long seed = 0;
  bool text = false;
};

ModuleParams load_params(const CommonOpts& o) {
  ModuleParams p;
  if (o.params_path.empty()) return p;
  const ordered_json j = read_json_file(o.params_path);
  p.m_mdl = j.value("m_mdl", p.m_mdl);
  p.k_th = j.value("k_th", p.k_th);
  p.k_to = j.value("k_to", p.k_to);
  p.u_min = j.value("u_min", p.u_min);
  p.u_max = j.value("u_max", p.u_max);
  p.g = j.value("g", p.g);
  if (j.contains("J_mdl")) {
    const auto& jm = j["J_mdl"];
    if (jm.is_number()) {
      p.J_mdl = jm.get<double>() * Mat3::Identity();
    } else {
      p.J_mdl = matrix_from_json(jm, 3, 3, "J_mdl");
    }
  }
  return p;
}

BeamSection load_section(const CommonOpts& o) {
  BeamSection s;
  if (o.section_path.empty()) return s;
  const ordered_json j = read_json_file(o.section_path);
  s.E = j.value("E", s.E);
  s.nu = j.value("nu", s.nu);
  s.r_out = j.value("r_out", s.r_out);
  s.r_in = j.value("r_in", s.r_in);
  return s;
}

ordered_json params_json(const ModuleParams& p) {
  ordered_json j;
  j["m_mdl"] = sig9(p.m_mdl);
  j["J_mdl"] = mat_json(p.J_mdl);
  j["k_th"] = sig9(p.k_th);
  j["k_to"] = sig9(p.k_to);
  j["u_min"] = sig9(p.u_min);
  j["u_max"] = sig9(p.u_max);
  j["g"] = sig9(p.g);
  return j;
}

ordered_json section_json(const BeamSection& s) {
  ordered_json j;
  j["E"] = sig9(s.E);
  j["nu"] = sig9(s.nu);
  j["r_out"] = sig9(s.r_out);
  j["r_in"] = sig9(s.r_in);
  return j;
}

void emit(const ordered_json& report, const CommonOpts& o) {
  if (o.text) {
    std::function<void(const std::string&, const ordered_json&)> walk =
        [&](const std::string& prefix, const ordered_json& v) {
          if (v.is_object()) {
            for (const auto& [k, val] : v.items())
              walk(prefix.empty() ? k : prefix + "." + k, val);
          } else {
            std::cout << prefix << ": " << v.dump() << "\n";
          }
        };
    walk("", report);
  } else {
    std::cout << report.dump(2) << "\n";
  }
}

void write_artifact(const CommonOpts& o, const std::string& name, const std::string& body) {
  if (o.out_dir.empty()) return;
  fs::create_directories(o.out_dir);
  const fs::path p = fs::path(o.out_dir) / name;
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ConfigParseError("cannot open " + p.string() + " for writing");
  f << body;
  if (!f) throw ConfigParseError("write failed: " + p.string());
}

ordered_json base_report(const std::string& command, const CommonOpts& o) {
  ordered_json j;
  j["command"] = command;
  j["seed"] = o.seed;
  j["threads"] = o.threads;
  return j;
}

// ---------------------------------------------------------------- analyze

int run_analyze(const std::string& input, const CommonOpts& o) {
  const ConfigFile cf = load_config(input);
  const Configuration config = cf.build();
  const ModuleParams params = load_params(o);
  const BeamSection section = load_section(o);
  const VehicleModel m = assemble_vehicle(config, params);
  const StiffnessSystem sys = assemble_stiffness(build_frame(config), section);
  const ComplianceResult comp = max_compliance(sys);
  const AxialLoadResult axial = max_axial_load(sys);

  ordered_json rep = base_report("analyze", o);
  rep["input"] = input;
  if (!cf.name.empty()) rep["name"] = cf.name;
  rep["n"] = m.n;
  rep["dof"] = m.dof;
  rep["mass"] = sig9(m.m_total);
  rep["inertia"] = mat_json(m.J);
  rep["layers"] = layer_count(config);
  rep["sigma1"] = sig9(comp.sigma1);
  rep["sigma2"] = sig9(axial.sigma2);
  rep["worst_member"] = axial.argmax_member;
  rep["joints"] = sys.frame.num_joints();
  rep["members"] = sys.frame.num_members();
  rep["params"] = params_json(params);
  rep["section"] = section_json(section);
  emit(rep, o);
  write_artifact(o, fs::path(input).stem().string() + "_analysis.json", rep.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------- allocate

int run_allocate(const std::string& input, const CommonOpts& o) {
  const ConfigFile cf = load_config(input);
  const Configuration config = cf.build();
  const ModuleParams params = load_params(o);
  const VehicleModel m = assemble_vehicle(config, params);
  const HoverSolution hover = hover_vector(m);

  ordered_json rep = base_report("allocate", o);
  rep["input"] = input;
  rep["method"] = o.method;
  rep["n"] = m.n;

  AllocationMatrix alloc;
  if (o.method == "pinv") {
    alloc = pseudo_inverse_allocation(m);
  } else if (o.method == "authority") {
    Mat6 Q = projector(m.M_tt);
    if (!o.q_path.empty()) Q = matrix_from_json(read_json_file(o.q_path), 6, 6, "Q");
    const AuthorityResult res = max_authority_allocation(m, hover.u_h, ellipse_from(Q));
    alloc = res.alloc;
    rep["radius"] = sig9(res.radius);
    rep["binding_row"] = res.binding_row;
    rep["binding_direction"] = vec_json(res.binding_direction);
  } else if (o.method == "power") {
    PowerModel pm;
    pm.u_h = hover.u_h;
    if (!o.sigma_path.empty())
      pm.Sigma = matrix_from_json(read_json_file(o.sigma_path), 6, 6, "sigma");
    const MinPowerResult res = min_power_allocation(m, hover.u_h, pm);
    alloc = res.alloc;
    rep["max_avg_power"] = sig9(res.max_avg_power);
    rep["iterations"] = res.iterations;
  } else {
    throw CLI::ValidationError("--method", "unknown method " + o.method);
  }

  // residual check before anything is written
  const double residual = (m.M_tt * alloc.C - alloc.H).cwiseAbs().maxCoeff();
  if (residual > 1e-6)
    throw SolverFailure("allocation residual " + std::to_string(residual));

  Mat6 torque = Mat6::Zero();
  torque.block<3, 3>(3, 3).setIdentity();
  const SubspaceRadius ball = authority_radius(m, alloc, hover.u_h, alloc.H);
  const SubspaceRadius tq = authority_radius(m, alloc, hover.u_h, torque);
  rep["residual"] = sig9(residual);
  rep["C"] = mat_json(alloc.C);
  rep["H"] = mat_json(alloc.H);
  rep["hover_u"] = vec_json(hover.u_h);
  rep["radius_ball"] = sig9(ball.radius);
  rep["radius_torque"] = sig9(tq.degenerate ? 0.0 : tq.radius);
  rep["params"] = params_json(params);
  emit(rep, o);
  write_artifact(o, fs::path(input).stem().string() + "_allocation.json", rep.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------- reachable

int run_reachable(const std::string& input, const std::string& axes_arg,
                  const CommonOpts& o) {
  const ConfigFile cf = load_config(input);
  const Configuration config = cf.build();
  const ModuleParams params = load_params(o);
  const VehicleModel m = assemble_vehicle(config, params);

  struct Request {
    std::string name;
    std::array<int, 3> axes;
  };
  std::vector<Request> requests;
  if (axes_arg.empty()) {
    requests.push_back({"thrust", {0, 1, 2}});
    requests.push_back({"torque", {3, 4, 5}});
  } else {
    std::array<int, 3> axes{};
    if (std::sscanf(axes_arg.c_str(), "%d,%d,%d", &axes[0], &axes[1], &axes[2]) != 3)
      throw CLI::ValidationError("--axes", "expected i,j,k");
    requests.push_back({"axes_" + std::to_string(axes[0]) + "_" + std::to_string(axes[1]) +
                            "_" + std::to_string(axes[2]),
                        axes});
  }

  ordered_json rep = base_report("reachable", o);
  rep["input"] = input;
  rep["hulls"] = ordered_json::array();
  const std::string stem = fs::path(input).stem().string();
  for (const auto& req : requests) {
    const ReachableGlobal hull = reachable_global(m, req.axes);
    ordered_json h;
    h["name"] = req.name;
    h["axes"] = {req.axes[0], req.axes[1], req.axes[2]};
    h["rank"] = hull.rank;
    h["facets"] = static_cast<int>(hull.facet_normals.cols());
    h["center"] = vec_json(hull.center);
    if (hull.rank == 3) {
      const std::string off = to_off(hull);
      const std::string fname = stem + "_" + req.name + ".off";
      if (!o.out_dir.empty()) {
        write_artifact(o, fname, off);
        h["file"] = (fs::path(o.out_dir) / fname).string();
      }
    }
    rep["hulls"].push_back(std::move(h));
  }
  emit(rep, o);
  return 0;
}

// ---------------------------------------------------------------- frame

int run_frame(const std::string& input, const CommonOpts& o) {
  const ConfigFile cf = load_config(input);
  const Configuration config = cf.build();
  const BeamSection section = load_section(o);
  const StiffnessSystem sys = assemble_stiffness(build_frame(config), section);
  const ComplianceResult comp = max_compliance(sys);
  const AxialLoadResult axial = max_axial_load(sys);
  const Eigen::VectorXd v = solve_displacements(sys, comp.worst_force);
  const std::vector<MemberLoad> loads = member_loads(sys, v);

  ordered_json rep = base_report("frame", o);
  rep["input"] = input;
  rep["joints"] = sys.frame.num_joints();
  rep["members"] = sys.frame.num_members();
  rep["sigma1"] = sig9(comp.sigma1);
  rep["sigma2"] = sig9(axial.sigma2);
  rep["worst_member"] = axial.argmax_member;
  rep["section"] = section_json(sys.section);

  // deformed shape under the worst-case balanced load, translations only
  ordered_json joints = ordered_json::array();
  for (int j = 0; j < sys.frame.num_joints(); ++j) {
    ordered_json row;
    row["position"] = vec_json(sys.frame.joints.col(j));
    row["displacement"] = vec_json(v.segment<3>(6 * j));
    row["rotation"] = vec_json(v.segment<3>(6 * j + 3));
    row["load"] = vec_json(comp.worst_force.segment<6>(6 * j));
    joints.push_back(std::move(row));
  }
  ordered_json members = ordered_json::array();
  for (int k = 0; k < sys.frame.num_members(); ++k) {
    ordered_json row;
    row["joints"] = {sys.frame.members[static_cast<std::size_t>(k)][0],
                     sys.frame.members[static_cast<std::size_t>(k)][1]};
    row["local_load"] = vec_json(loads[static_cast<std::size_t>(k)]);
    members.push_back(std::move(row));
  }
  ordered_json detail;
  detail["joints"] = std::move(joints);
  detail["members"] = std::move(members);
  write_artifact(o, fs::path(input).stem().string() + "_frame.json",
                 detail.dump(2) + "\n");
  if (o.out_dir.empty()) rep["detail"] = std::move(detail);
  emit(rep, o);
  return 0;
}

// ---------------------------------------------------------------- optimize / export-mip

ObjectiveSpec load_objective(const CommonOpts& o) {
  ObjectiveSpec spec;
  spec.params = load_params(o);
  if (o.objective_path.empty()) return spec;
  const ordered_json j = read_json_file(o.objective_path);
  const std::string kind = j.value("kind", std::string("torque_authority"));
  if (kind == "torque_authority") spec.kind = ObjectiveKind::TorqueAuthority;
  else if (kind == "ellipse_authority") spec.kind = ObjectiveKind::EllipseAuthority;
  else if (kind == "structural_bound") spec.kind = ObjectiveKind::StructuralBound;
  else throw ConfigParseError("unknown objective kind " + kind);
  spec.hover_u = j.value("hover_u", spec.hover_u);
  spec.module_scale = j.value("module_scale", spec.module_scale);
  if (j.contains("Q")) spec.Q = matrix_from_json(j["Q"], 6, 6, "Q");
  if (j.contains("H_target"))
    spec.H_target = matrix_from_json(j["H_target"], 6, 6, "H_target");
  if (j.contains("wake")) {
    const auto& w = j["wake"];
    spec.wake.enabled = w.value("enabled", spec.wake.enabled);
    spec.wake.radius = w.value("radius", spec.wake.radius);
    spec.wake.length = w.value("length", spec.wake.length);
  }
  if (j.contains("allowed_orientations"))
    spec.allowed_orientations = j["allowed_orientations"].get<std::vector<int>>();
  if (j.contains("allowed_spins"))
    spec.allowed_spins = j["allowed_spins"].get<std::vector<int>>();
  return spec;
}

int run_optimize(int n, const std::string& backend, long long max_nodes,
                 double time_limit, const CommonOpts& o) {
  const ObjectiveSpec spec = load_objective(o);
  const AdmissibleGraph g = build_graph(n);
  const ConfigModel model = build_model(g, n, spec);
  SolveLimits limits;
  if (max_nodes > 0) limits.node_limit = max_nodes;
  if (time_limit > 0) limits.time_limit_s = time_limit;

  SolveResult res;
  if (backend == "exhaustive") res = solve_exhaustive(model, limits);
  else if (backend == "bnb") res = solve_branch_and_bound(model, limits);
  else throw CLI::ValidationError("--backend", "unknown backend " + backend);

  ordered_json rep = base_report("optimize", o);
  rep["n"] = n;
  rep["backend"] = backend;
  rep["graph_vertices"] = static_cast<int>(g.vertices.size());
  rep["status"] = to_string(res.status);
  rep["nodes"] = res.nodes;
  rep["evaluations"] = res.evaluations;
  if (res.status == SolveStatus::Optimal || !res.best.vertex_ids.empty()) {
    rep["objective"] = sig9(res.objective);
    rep["bound_gap"] = sig9(res.bound_gap);
    ConfigFile best;
    best.name = "optimized_n" + std::to_string(n);
    best.note = "objective " + std::string(res.status == SolveStatus::Optimal
                                               ? "optimal"
                                               : "incumbent");
    best.module_scale = spec.module_scale;
    for (std::size_t i = 0; i < res.best.vertex_ids.size(); ++i)
      best.placements.push_back(
          {g.vertices[static_cast<std::size_t>(res.best.vertex_ids[i])],
           res.best.orientations[i], res.best.spins[i]});
    const std::string body = config_to_json(best);
    write_artifact(o, best.name + ".json", body);
    if (o.out_dir.empty()) rep["config"] = ordered_json::parse(body);
  }
  emit(rep, o);
  if (res.status == SolveStatus::Infeasible)
    throw SolverFailure("no feasible assignment");
  return 0;
}

int run_export_mip(int n, const std::string& output, const CommonOpts& o) {
  const ObjectiveSpec spec = load_objective(o);
  const AdmissibleGraph g = build_graph(n);
  const ConfigModel model = build_model(g, n, spec);
  export_model(model, output);

  ordered_json rep = base_report("export-mip", o);
  rep["n"] = n;
  rep["output"] = output;
  rep["vars"] = static_cast<int>(model.vars.size());
  rep["rows"] = static_cast<int>(model.rows.size());
  rep["cones"] = static_cast<int>(model.soc_rows.size());
  emit(rep, o);
  return 0;
}

// ---------------------------------------------------------------- fixtures

int run_fixtures(const CommonOpts& o) {
  const std::string dir = o.out_dir.empty() ? "." : o.out_dir;
  ordered_json rep = base_report("fixtures", o);
  rep["fixtures"] = ordered_json::array();
  for (const auto& f : shipped_fixtures()) {
    ConfigFile cf;
    cf.name = f.name;
    cf.note = f.note;
    cf.module_scale = f.config.module_scale;
    cf.placements = f.config.placements;
    fs::create_directories(dir);
    const fs::path path = fs::path(dir) / (f.name + ".json");
    save_config(cf, path.string());
    ordered_json row;
    row["name"] = f.name;
    row["modules"] = static_cast<int>(f.config.size());
    row["file"] = path.string();
    rep["fixtures"].push_back(std::move(row));
  }
  emit(rep, o);
  return 0;
}

void error_json(const std::string& type, const std::string& what) {
  ordered_json e;
  e["error"]["type"] = type;
  e["error"]["what"] = what;
  std::cerr << e.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dodecahedral modular rotorcraft toolkit"};
  app.require_subcommand(1);

  CommonOpts o;
  app.add_option("--params", o.params_path, "module parameter overrides (JSON)");
  app.add_option("--section", o.section_path, "beam section overrides (JSON)");
  app.add_option("--Q", o.q_path, "6x6 ellipse metric (JSON)");
  app.add_option("--sigma", o.sigma_path, "6x6 thrust covariance (JSON)");
  app.add_option("--objective", o.objective_path, "objective spec (JSON)");
  app.add_option("--threads", o.threads, "worker threads");
  app.add_option("--seed", o.seed, "seed recorded in reports");
  app.add_option("--out", o.out_dir, "artifact output directory");
  app.add_flag("--text", o.text, "human-readable output instead of JSON");

  std::string input, axes_arg, backend = "exhaustive", mip_output;
  int opt_n = 2;
  long long max_nodes = 0;
  double time_limit = 0.0;

  auto* analyze = app.add_subcommand("analyze", "configuration summary");
  analyze->add_option("input", input, "configuration file")->required();

  auto* allocate = app.add_subcommand("allocate", "compute an allocation matrix");
  allocate->add_option("input", input, "configuration file")->required();
  allocate->add_option("--method", o.method, "pinv | authority | power");

  auto* reachable = app.add_subcommand("reachable", "reachable-set hulls");
  reachable->add_option("input", input, "configuration file")->required();
  reachable->add_option("--axes", axes_arg, "three wrench axes i,j,k");

  auto* frame = app.add_subcommand("frame", "worst-case loads and deformation");
  frame->add_option("input", input, "configuration file")->required();

  auto* optimize = app.add_subcommand("optimize", "search module assignments");
  optimize->add_option("--n", opt_n, "module count")->required();
  optimize->add_option("--backend", backend, "exhaustive | bnb");
  optimize->add_option("--max-nodes", max_nodes, "node limit");
  optimize->add_option("--time-limit", time_limit, "seconds");

  auto* export_mip = app.add_subcommand("export-mip", "write the mixed-integer model");
  export_mip->add_option("--n", opt_n, "module count")->required();
  export_mip->add_option("output", mip_output, "model file path")->required();

  auto* fixtures = app.add_subcommand("fixtures", "materialize shipped configurations");

  // global flags remain valid after the subcommand name
  for (CLI::App* sub : {analyze, allocate, reachable, frame, optimize, export_mip, fixtures})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    error_json("usage", e.what());
    return 2;
  }

  try {
    if (analyze->parsed()) return run_analyze(input, o);
    if (allocate->parsed()) return run_allocate(input, o);
    if (reachable->parsed()) return run_reachable(input, axes_arg, o);
    if (frame->parsed()) return run_frame(input, o);
    if (optimize->parsed()) return run_optimize(opt_n, backend, max_nodes, time_limit, o);
    if (export_mip->parsed()) return run_export_mip(opt_n, mip_output, o);
    if (fixtures->parsed()) return run_fixtures(o);
    error_json("usage", "no command");
    return 2;
  } catch (const CLI::ValidationError& e) {
    error_json("usage", e.what());
    return 2;
  } catch (const ConfigParseError& e) {
    error_json("validation", e.what());
    return 3;
  } catch (const NotInLattice& e) {
    error_json("validation", e.what());
    return 3;
  } catch (const DuplicatePosition& e) {
    error_json("validation", e.what());
    return 3;
  } catch (const Disconnected& e) {
    error_json("validation", e.what());
    return 3;
  } catch (const InvalidConfiguration& e) {
    error_json("validation", e.what());
    return 3;
  } catch (const DomainError& e) {
    error_json("validation", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    error_json("validation", e.what());
    return 3;
  } catch (const std::out_of_range& e) {
    error_json("validation", e.what());
    return 3;
  } catch (const std::exception& e) {
    // solver-side failures: SOCP, stiffness, search
    error_json("solver", e.what());
    return 4;
  }
}
