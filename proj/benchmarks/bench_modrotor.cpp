// Microbenchmarks for the hot paths: vehicle assembly, the authority SOCP,
// stiffness assembly with its eigendecomposition, and the zonotope hull.

#include <benchmark/benchmark.h>

#include "modrotor/allocation.hpp"
#include "modrotor/dynamics.hpp"
#include "modrotor/fixtures.hpp"
#include "modrotor/frame.hpp"
#include "modrotor/geometry.hpp"

using namespace modrotor;

namespace {

ModuleParams strong_params() {
  ModuleParams p;
  p.k_th = 30.0;
  p.k_to = 1.5;
  return p;
}

void bm_rotation_group(benchmark::State& state) {
  const DodecahedronModel& model = canonical_model();
  for (auto _ : state) benchmark::DoNotOptimize(rotation_group(model).rotations.size());
}
BENCHMARK(bm_rotation_group);

void bm_lattice_decompose(benchmark::State& state) {
  const LatticeBasis& basis = canonical_basis();
  const Vec3 v = basis.B * Vec3(17, -9, 4);
  for (auto _ : state) benchmark::DoNotOptimize(lattice_decompose(v, basis));
}
BENCHMARK(bm_lattice_decompose);

void bm_assemble_vehicle(benchmark::State& state) {
  const Configuration& cfg = fixture("array16").config;
  const ModuleParams params = strong_params();
  for (auto _ : state) benchmark::DoNotOptimize(assemble_vehicle(cfg, params).n);
}
BENCHMARK(bm_assemble_vehicle);

void bm_authority_socp(benchmark::State& state) {
  const VehicleModel m = assemble_vehicle(fixture("octorotor").config, strong_params());
  const HoverSolution h = hover_vector(m);
  const EllipseSpec e = ellipse_from(projector(m.M_tt));
  for (auto _ : state) benchmark::DoNotOptimize(max_authority_allocation(m, h.u_h, e).radius);
}
BENCHMARK(bm_authority_socp);

void bm_stiffness_indicators(benchmark::State& state) {
  const Configuration& cfg = fixture("tetra_deca").config;
  for (auto _ : state) {
    const StiffnessSystem sys = assemble_stiffness(build_frame(cfg), BeamSection{});
    benchmark::DoNotOptimize(max_compliance(sys).sigma1);
  }
}
BENCHMARK(bm_stiffness_indicators)->Unit(benchmark::kMillisecond);

void bm_zonotope_hull(benchmark::State& state) {
  const VehicleModel m = assemble_vehicle(fixture("dodeca12_6dof").config, strong_params());
  for (auto _ : state)
    benchmark::DoNotOptimize(reachable_global(m, {3, 4, 5}).facet_normals.cols());
}
BENCHMARK(bm_zonotope_hull)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
