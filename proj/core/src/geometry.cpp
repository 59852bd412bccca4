#include "modrotor/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <queue>
#include <set>

namespace modrotor {

namespace {

constexpr double kGeomTol = 1e-9;

// Rounded comparison key so sorting and set membership are stable under
// floating-point noise.
std::array<long long, 3> round_key(const Vec3& v, double cell = kGeomTol) {
  return {static_cast<long long>(std::llround(v.x() / cell)),
          static_cast<long long>(std::llround(v.y() / cell)),
          static_cast<long long>(std::llround(v.z() / cell))};
}

}  // namespace

DodecahedronModel build_dodecahedron() {
  const double phi = std::numbers::phi;

  // Textbook coordinates: cube corners plus three golden rectangles. The
  // inscribed cube we keep is exactly the (+-1,+-1,+-1) corner set.
  std::vector<Vec3> raw;
  for (double sx : {1.0, -1.0})
    for (double sy : {1.0, -1.0})
      for (double sz : {1.0, -1.0}) raw.emplace_back(sx, sy, sz);
  for (double sy : {1.0, -1.0})
    for (double sz : {1.0, -1.0}) raw.emplace_back(0.0, sy / phi, sz * phi);
  for (double sx : {1.0, -1.0})
    for (double sy : {1.0, -1.0}) raw.emplace_back(sx / phi, sy * phi, 0.0);
  for (double sx : {1.0, -1.0})
    for (double sz : {1.0, -1.0}) raw.emplace_back(sx * phi, 0.0, sz / phi);

  // Inradius of these coordinates: distance from origin to a face plane.
  // Face normals are the (0, +-phi, +-1) family; the supporting plane through
  // the five face vertices sits at phi^2 / sqrt(phi^2 + 1).
  const double inradius_raw =
      phi * phi / std::sqrt(phi * phi + 1.0);  // 1.37638192...

  // Frame choice: the cube diagonal through (1,1,1) becomes +z, and the cube
  // neighbor (1,1,-1) of that vertex lands in the +y half-plane. The azimuth
  // matters: it lines the lattice tetrahedron's base up with the x/y axes,
  // which is where the flown tetracopter's mixer conventions live.
  const Vec3 diag = Vec3(1, 1, 1).normalized();
  Vec3 yref = Vec3(1, 1, -1) - (Vec3(1, 1, -1).dot(diag)) * diag;
  yref.normalize();
  Mat3 R;
  R.row(2) = diag;
  R.row(1) = yref;
  R.row(0) = yref.cross(diag);

  DodecahedronModel m;
  std::vector<Vec3> rotated(20);
  std::vector<int> raw_index(20);
  for (int i = 0; i < 20; ++i) rotated[i] = (R * raw[i]) / inradius_raw;

  std::vector<int> order(20);
  for (int i = 0; i < 20; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    auto ka = round_key(rotated[a]);
    auto kb = round_key(rotated[b]);
    if (ka[2] != kb[2]) return ka[2] > kb[2];
    if (ka[0] != kb[0]) return ka[0] > kb[0];
    return ka[1] > kb[1];
  });
  for (int i = 0; i < 20; ++i) {
    m.vertices[i] = rotated[order[i]];
    raw_index[i] = order[i];
  }

  m.circumradius = m.vertices[0].norm();

  // Edges: all pairs at the minimal pairwise distance.
  double min_d = std::numeric_limits<double>::max();
  for (int i = 0; i < 20; ++i)
    for (int j = i + 1; j < 20; ++j)
      min_d = std::min(min_d, (m.vertices[i] - m.vertices[j]).norm());
  m.edge_length = min_d;
  for (int i = 0; i < 20; ++i)
    for (int j = i + 1; j < 20; ++j)
      if ((m.vertices[i] - m.vertices[j]).norm() < min_d + kGeomTol)
        m.edges.push_back({i, j});

  // Faces: for each of the 12 face normals, collect the 5 vertices on the
  // supporting plane and ring them by angle around the normal.
  std::vector<Vec3> normals;
  for (double s1 : {1.0, -1.0})
    for (double s2 : {1.0, -1.0}) {
      normals.emplace_back(0.0, s1 * phi, s2);
      normals.emplace_back(s1 * phi, s2, 0.0);
      normals.emplace_back(s1, 0.0, s2 * phi);
    }
  for (Vec3 nr : normals) {
    Vec3 n = (R * nr).normalized();
    std::vector<int> on_plane;
    for (int i = 0; i < 20; ++i)
      if (std::abs(m.vertices[i].dot(n) - 1.0) < 1e-7) on_plane.push_back(i);
    if (on_plane.size() != 5) throw std::logic_error("face extraction failed");
    Vec3 u = (m.vertices[on_plane[0]] - n).normalized();
    Vec3 v = n.cross(u);
    std::sort(on_plane.begin(), on_plane.end(), [&](int a, int b) {
      const Vec3 pa = m.vertices[a], pb = m.vertices[b];
      return std::atan2(pa.dot(v), pa.dot(u)) < std::atan2(pb.dot(v), pb.dot(u));
    });
    std::array<int, 5> f;
    std::copy(on_plane.begin(), on_plane.end(), f.begin());
    m.faces.push_back(f);
  }

  // Inscribed cube: the raw (+-1,+-1,+-1) corners, i.e. raw indices 0..7.
  int k = 0;
  for (int i = 0; i < 20; ++i)
    if (raw_index[i] < 8) m.cube_vertices[k++] = i;

  const double cube_edge_raw = 2.0 / inradius_raw;
  m.cube_edge_length = cube_edge_raw;
  for (int a = 0; a < 8; ++a)
    for (int b = a + 1; b < 8; ++b) {
      int i = m.cube_vertices[a], j = m.cube_vertices[b];
      if (std::abs((m.vertices[i] - m.vertices[j]).norm() - cube_edge_raw) <
          kGeomTol)
        m.cube_edges.push_back({std::min(i, j), std::max(i, j)});
    }

  // Cube axes from the top vertex's three cube edges, pointing away from it.
  Vec3 top = m.vertices[0];
  std::vector<Vec3> axes;
  for (const auto& e : m.cube_edges) {
    if (e[0] == 0)
      axes.push_back((m.vertices[e[1]] - top) / cube_edge_raw);
    else if (e[1] == 0)
      axes.push_back((m.vertices[e[0]] - top) / cube_edge_raw);
  }
  if (axes.size() != 3) throw std::logic_error("top vertex cube degree != 3");
  // Deterministic column order: descending azimuth keeps a right-handed set.
  std::sort(axes.begin(), axes.end(), [](const Vec3& a, const Vec3& b) {
    return std::atan2(a.y(), a.x()) > std::atan2(b.y(), b.x());
  });
  for (int c = 0; c < 3; ++c) m.cube_axes.col(c) = axes[c];
  if (m.cube_axes.determinant() < 0) {
    m.cube_axes.col(1).swap(m.cube_axes.col(2));
  }

  return m;
}

RotationGroup rotation_group(const DodecahedronModel& model) {
  // Candidate rotations map a reference vertex frame onto every other
  // adjacent pair; keep the proper ones that permute the vertex set.
  std::set<std::array<long long, 3>> vertex_set;
  for (const auto& v : model.vertices) vertex_set.insert(round_key(v, 1e-6));

  auto frame_of = [](const Vec3& a, const Vec3& b) {
    Mat3 F;
    Vec3 u1 = a.normalized();
    Vec3 u2 = (b - b.dot(u1) * u1).normalized();
    F.col(0) = u1;
    F.col(1) = u2;
    F.col(2) = u1.cross(u2);
    return F;
  };

  const Vec3 va = model.vertices[model.edges[0][0]];
  const Vec3 vb = model.vertices[model.edges[0][1]];
  const Mat3 F0 = frame_of(va, vb);

  auto permutes_vertices = [&](const Mat3& R) {
    for (const auto& v : model.vertices) {
      if (!vertex_set.count(round_key(R * v, 1e-6))) return false;
    }
    return true;
  };

  RotationGroup g;
  std::set<std::array<long long, 9>> seen;
  for (const auto& e : model.edges) {
    for (int flip = 0; flip < 2; ++flip) {
      const Vec3 wa = model.vertices[flip ? e[1] : e[0]];
      const Vec3 wb = model.vertices[flip ? e[0] : e[1]];
      Mat3 R = frame_of(wa, wb) * F0.transpose();
      if (R.determinant() < 0.5) continue;
      if (!permutes_vertices(R)) continue;
      std::array<long long, 9> key;
      for (int i = 0; i < 9; ++i)
        key[i] = std::llround(R(i / 3, i % 3) * 1e8);
      if (seen.insert(key).second) g.rotations.push_back(R);
    }
  }
  return g;
}

bool ConnectionSet::contains(const Vec3& t, double tol) const {
  return std::any_of(translations.begin(), translations.end(),
                     [&](const Vec3& c) { return (c - t).norm() < tol; });
}

ConnectionSet connection_set(const DodecahedronModel& model) {
  ConnectionSet cs;
  for (const auto& e : model.cube_edges) {
    cs.translations.push_back(model.vertices[e[0]] + model.vertices[e[1]]);
    cs.generating_pairs.push_back(e);
  }
  return cs;
}

std::size_t full_connection_count(const DodecahedronModel& model,
                                  const RotationGroup& group) {
  // Non-adjacent vertex pairs inside each pentagonal face, times rotations.
  std::set<std::array<int, 2>> is_edge;
  for (const auto& e : model.edges) is_edge.insert(e);
  std::size_t diagonals = 0;
  for (const auto& f : model.faces) {
    for (int a = 0; a < 5; ++a)
      for (int b = a + 1; b < 5; ++b) {
        std::array<int, 2> p{std::min(f[a], f[b]), std::max(f[a], f[b])};
        if (!is_edge.count(p)) ++diagonals;
      }
  }
  return diagonals * group.rotations.size();
}

LatticeBasis lattice_basis(const DodecahedronModel& model,
                           const ConnectionSet& conns) {
  // Pick the translations whose cube coordinates are (1,1,0), (1,0,1), (0,1,1).
  const std::array<Vec3, 3> want = {Vec3(1, 1, 0), Vec3(1, 0, 1), Vec3(0, 1, 1)};
  LatticeBasis basis;
  std::array<Vec3*, 3> slots = {&basis.b1, &basis.b2, &basis.b3};
  for (int k = 0; k < 3; ++k) {
    bool found = false;
    for (const auto& t : conns.translations) {
      if ((model.to_cube(t) - want[k]).norm() < 1e-6) {
        *slots[k] = t;
        found = true;
        break;
      }
    }
    if (!found) throw std::logic_error("lattice basis translation missing");
  }
  basis.B.col(0) = basis.b1;
  basis.B.col(1) = basis.b2;
  basis.B.col(2) = basis.b3;
  return basis;
}

Eigen::Vector3i lattice_decompose(const Vec3& v, const LatticeBasis& basis,
                                  double tol) {
  Vec3 coeffs = basis.B.colPivHouseholderQr().solve(v);
  Eigen::Vector3i out;
  for (int i = 0; i < 3; ++i) out[i] = static_cast<int>(std::llround(coeffs[i]));
  Vec3 recomposed = basis.B * out.cast<double>();
  if ((recomposed - v).norm() > tol)
    throw NotInLattice("vector is not an integer combination of the basis");
  return out;
}

std::vector<RotorOrientation> canonical_orientations(
    const DodecahedronModel& model) {
  std::vector<RotorOrientation> out(20);
  std::vector<double> class_angles;
  for (int i = 0; i < 20; ++i) {
    out[i].index = i;
    out[i].direction = model.vertices[i].normalized();
    double ang = std::acos(std::clamp(out[i].direction.z(), -1.0, 1.0)) * 180.0 /
                 std::numbers::pi;
    out[i].tilt_deg = ang;
    bool known = false;
    for (std::size_t c = 0; c < class_angles.size(); ++c) {
      if (std::abs(class_angles[c] - ang) < 1e-6) {
        out[i].tilt_class = static_cast<int>(c);
        known = true;
        break;
      }
    }
    if (!known) {
      out[i].tilt_class = static_cast<int>(class_angles.size());
      class_angles.push_back(ang);
    }
  }
  return out;
}

const DodecahedronModel& canonical_model() {
  static const DodecahedronModel m = build_dodecahedron();
  return m;
}

const LatticeBasis& canonical_basis() {
  static const LatticeBasis b =
      lattice_basis(canonical_model(), connection_set(canonical_model()));
  return b;
}

const std::vector<Eigen::Vector3i>& lattice_neighbor_steps() {
  static const std::vector<Eigen::Vector3i> steps = [] {
    std::vector<Eigen::Vector3i> s;
    for (const auto& t : connection_set(canonical_model()).translations)
      s.push_back(lattice_decompose(t, canonical_basis()));
    return s;
  }();
  return steps;
}

Configuration make_configuration(const std::vector<ModulePlacement>& placements,
                                 double module_scale) {
  if (placements.empty())
    throw std::invalid_argument("configuration needs at least one module");
  const auto& model = canonical_model();
  const auto& basis = canonical_basis();
  const double scale = module_scale / model.edge_length;

  Configuration cfg;
  cfg.placements = placements;
  cfg.module_scale = module_scale;

  std::set<std::array<int, 3>> seen;
  std::vector<Vec3> pts;
  for (const auto& pl : placements) {
    std::array<int, 3> key{pl.lattice_pos[0], pl.lattice_pos[1], pl.lattice_pos[2]};
    if (!seen.insert(key).second)
      throw DuplicatePosition("duplicate lattice position (" +
                              std::to_string(key[0]) + "," +
                              std::to_string(key[1]) + "," +
                              std::to_string(key[2]) + ")");
    if (pl.orientation < 0 || pl.orientation >= 20)
      throw std::invalid_argument("orientation index out of range");
    if (pl.spin != 1 && pl.spin != -1)
      throw std::invalid_argument("spin must be +1 or -1");
    pts.push_back(scale * (basis.B * pl.lattice_pos.cast<double>()));
  }

  // Connectivity in lattice space: neighbors differ by a connection
  // translation, i.e. by one of the 12 integer steps.
  const auto& steps = lattice_neighbor_steps();
  const std::size_t n = placements.size();
  std::vector<char> visited(n, 0);
  std::queue<std::size_t> bfs;
  bfs.push(0);
  visited[0] = 1;
  std::size_t reached = 1;
  while (!bfs.empty()) {
    std::size_t i = bfs.front();
    bfs.pop();
    for (std::size_t j = 0; j < n; ++j) {
      if (visited[j]) continue;
      Eigen::Vector3i d = placements[j].lattice_pos - placements[i].lattice_pos;
      if (std::any_of(steps.begin(), steps.end(),
                      [&](const Eigen::Vector3i& s) { return s == d; })) {
        visited[j] = 1;
        ++reached;
        bfs.push(j);
      }
    }
  }
  if (reached != n)
    throw Disconnected("placement graph is not connected (" +
                       std::to_string(reached) + " of " + std::to_string(n) +
                       " reachable)");

  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(n);
  cfg.offset = -mean;
  for (auto& p : pts) p -= mean;
  cfg.centered_positions = pts;
  return cfg;
}

ValidityReport is_valid_configuration(const Configuration& config) {
  ValidityReport rep;
  try {
    make_configuration(config.placements, config.module_scale);
    rep.valid = true;
    rep.diagnostic = "ok";
  } catch (const DuplicatePosition& e) {
    rep.valid = false;
    rep.diagnostic = e.what();
  } catch (const Disconnected& e) {
    rep.valid = false;
    rep.diagnostic = e.what();
  } catch (const std::exception& e) {
    rep.valid = false;
    rep.diagnostic = e.what();
  }
  return rep;
}

bool check_no_overlap_positions(const DodecahedronModel& model,
                                const std::vector<Vec3>& centers,
                                double module_scale) {
  const double scale = module_scale / model.edge_length;
  const double rc = scale * model.circumradius;

  // Outward unit face normals; each face plane sits at the inradius. The
  // shape is centrally symmetric, so two translated copies share volume
  // exactly when half the center offset lies strictly inside all twelve
  // planes. Connected neighbors land exactly on a plane (touching).
  std::vector<Vec3> normals(model.faces.size());
  for (std::size_t f = 0; f < model.faces.size(); ++f) {
    Vec3 c = Vec3::Zero();
    for (int vi : model.faces[f]) c += model.vertices[vi];
    normals[f] = c.normalized();
  }

  for (std::size_t i = 0; i < centers.size(); ++i) {
    for (std::size_t j = i + 1; j < centers.size(); ++j) {
      const Vec3 t = centers[j] - centers[i];
      if (t.norm() >= 2.0 * rc) continue;  // circumspheres disjoint
      double support = 0.0;
      for (const Vec3& n : normals) support = std::max(support, std::abs(n.dot(t)));
      if (support < 2.0 * scale * (1.0 - 1e-9)) return false;
    }
  }
  return true;
}

bool check_no_overlap(const Configuration& config) {
  return check_no_overlap_positions(canonical_model(), config.centered_positions,
                                    config.module_scale);
}

}  // namespace modrotor
