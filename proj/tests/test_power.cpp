#include <doctest.h>

#include <cmath>
#include <vector>

#include "modrotor/allocation.hpp"
#include "modrotor/fixtures.hpp"

using namespace modrotor;

namespace {

// Reference 1F1 in extended precision. For z < 0 we sum the transformed
// series e^z 1F1(b-a, b, -z), which has positive terms for the parameter
// range used here, so the plain product recurrence loses nothing.
long double ref_series(long double a, long double b, long double z) {
  long double sum = 1.0L, term = 1.0L;
  for (int k = 0; k < 100000; ++k) {
    term *= (a + k) / ((b + k) * (k + 1)) * z;
    sum += term;
    if (k > 4 && fabsl(term) < 1e-24L * fabsl(sum)) break;
  }
  return sum;
}

long double ref_1f1(long double a, long double b, long double z) {
  if (z < 0.0L) return expl(z) * ref_series(b - a, b, -z);
  return ref_series(a, b, z);
}

// E|N(mu, sd^2)|^(3/2) by composite Simpson with a node pinned at the kink.
double moment_oracle(double mu, double sd) {
  if (sd == 0.0) return std::pow(std::abs(mu), 1.5);
  const double inv = 1.0 / (sd * std::sqrt(2.0 * M_PI));
  auto g = [&](double x) {
    const double s = (x - mu) / sd;
    return std::pow(std::abs(x), 1.5) * inv * std::exp(-0.5 * s * s);
  };
  auto simpson = [&](double lo, double hi) {
    if (hi <= lo) return 0.0;
    const int n = 20000;  // even
    const double h = (hi - lo) / n;
    double acc = g(lo) + g(hi);
    for (int i = 1; i < n; ++i) acc += g(lo + i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
  };
  const double lo = mu - 12.0 * sd, hi = mu + 12.0 * sd;
  if (lo < 0.0 && hi > 0.0) return simpson(lo, 0.0) + simpson(0.0, hi);
  return simpson(lo, hi);
}

}  // namespace

TEST_SUITE("power") {

TEST_CASE("confluent hypergeometric matches extended-precision sums") {
  const double zs_neg[] = {-200, -100, -50, -20, -5, -1, -0.1, -1e-6};
  const double zs_pos[] = {1e-6, 0.1, 2, 5, 20, 50, 100};
  const std::pair<double, double> ab[] = {{-0.75, 0.5}, {0.25, 1.5}, {1.25, 2.5}};
  for (const auto& [a, b] : ab) {
    for (double z : zs_neg) {
      const long double want = ref_1f1(a, b, z);
      const double got = hyp1f1(a, b, z);
      CHECK(std::abs(got - static_cast<double>(want)) <=
            1e-12 * std::max(1.0, std::abs(static_cast<double>(want))));
    }
    for (double z : zs_pos) {
      const long double want = ref_1f1(a, b, z);
      const double got = hyp1f1(a, b, z);
      CHECK(std::abs(got - static_cast<double>(want)) <=
            1e-12 * std::max(1.0, std::abs(static_cast<double>(want))));
    }
  }
}

TEST_CASE("1F1 limit values") {
  CHECK(hyp1f1(-0.75, 0.5, 0.0) == 1.0);
  for (double z : {-30.0, -3.0, -0.3, 0.3, 3.0, 30.0}) {
    CHECK(hyp1f1(0.5, 0.5, z) ==
          doctest::Approx(std::exp(z)).epsilon(1e-12));
  }
}

TEST_CASE("Kummer transform holds across the two evaluation paths") {
  // lhs runs the direct series, rhs the reflected one
  for (double z : {0.5, 2.0, 5.0, 10.0}) {
    const double lhs = hyp1f1(-0.75, 0.5, z);
    const double rhs = std::exp(z) * hyp1f1(1.25, 0.5, -z);
    CHECK(std::abs(lhs - rhs) <= 5e-12 * (std::abs(lhs) + std::abs(rhs) + 1.0));
  }
}

TEST_CASE("Gauss contiguous relation") {
  const std::pair<double, double> ab[] = {{-0.75, 0.5}, {1.2, 3.4}};
  for (const auto& [a, b] : ab) {
    for (double z : {-40.0, -7.0, -0.9, 0.4, 3.0}) {
      const double fm = hyp1f1(a - 1.0, b, z);
      const double f0 = hyp1f1(a, b, z);
      const double fp = hyp1f1(a + 1.0, b, z);
      const double res = (b - a) * fm + (2.0 * a - b + z) * f0 - a * fp;
      const double scale =
          std::abs((b - a) * fm) + std::abs((2.0 * a - b + z) * f0) + std::abs(a * fp);
      CHECK(std::abs(res) <= 1e-10 * (scale + 1.0));
    }
  }
}

TEST_CASE("1F1 rejects nonpositive integer b") {
  CHECK_THROWS_AS(hyp1f1(0.5, 0.0, 1.0), DomainError);
  CHECK_THROWS_AS(hyp1f1(0.5, -2.0, 1.0), DomainError);
  CHECK_NOTHROW(hyp1f1(0.5, -2.5, 0.7));
}

TEST_CASE("average power equals the Gaussian absolute moment") {
  const double mus[] = {0.0, 0.2, 0.5, 1.0, 2.0};
  const double sds[] = {0.02, 0.1, 0.4, 1.0, 3.0};
  const Mat6 Sigma = Mat6::Identity();
  for (double mu : mus) {
    for (double sd : sds) {
      Vec6 c = Vec6::Zero();
      c[0] = sd;  // variance c' Sigma c = sd^2
      const double got = avg_power(c, mu, Sigma);
      const double want = moment_oracle(mu, sd);
      CHECK(std::abs(got - want) <= 1e-6 * want);
    }
  }
  // deterministic limit and the deep low-noise expansion
  CHECK(avg_power(Vec6::Zero(), 2.0, Sigma) ==
        doctest::Approx(std::pow(2.0, 1.5)).epsilon(1e-14));
  Vec6 tiny = Vec6::Zero();
  tiny[0] = 0.02;
  CHECK(std::abs(avg_power(tiny, 3.0, Sigma) - moment_oracle(3.0, 0.02)) <=
        1e-6 * moment_oracle(3.0, 0.02));
  // zero-mean closed form: 2^(3/4) Gamma(5/4) / sqrt(pi) * q^(3/4)
  const double zscale = std::pow(2.0, 0.75) * std::tgamma(1.25) / std::sqrt(M_PI);
  Vec6 c = Vec6::Zero();
  c[0] = 0.4;
  CHECK(avg_power(c, 0.0, Sigma) ==
        doctest::Approx(zscale * std::pow(0.16, 0.75)).epsilon(1e-10));
}

TEST_CASE("power kernel is positive and convex on a log grid") {
  std::vector<double> grid(200);
  for (int i = 0; i < 200; ++i) grid[i] = std::pow(10.0, -3.0 + 6.0 * i / 199.0);
  const ConvexityReport rep = convexity_check_f(grid);
  CHECK(rep.positive);
  CHECK(rep.convex);
}

TEST_CASE("min-power allocation never loses to the pseudo-inverse") {
  ModuleParams p;
  p.k_th = 30.0;
  p.k_to = 1.5;
  const VehicleModel m = assemble_vehicle(fixture("octorotor").config, p);
  const HoverSolution h = hover_vector(m);
  const AllocationMatrix pinv = pseudo_inverse_allocation(m);

  for (double s : {1.0, 0.1}) {
    PowerModel pm;
    pm.Sigma = Mat6::Identity();
    pm.Sigma.diagonal().tail<3>().setConstant(s);
    pm.u_h = h.u_h;

    const MinPowerResult mp = min_power_allocation(m, h.u_h, pm);
    CHECK((m.M_tt * mp.alloc.C - mp.alloc.H).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((mp.alloc.C * mp.alloc.H - mp.alloc.C).cwiseAbs().maxCoeff() < 1e-8);

    double worst = 0.0, worst_pinv = 0.0;
    for (int i = 0; i < m.n; ++i) {
      worst = std::max(worst, avg_power(mp.alloc.C.row(i), h.u_h[i], pm.Sigma));
      worst_pinv =
          std::max(worst_pinv, avg_power(pinv.C.row(i), h.u_h[i], pm.Sigma));
    }
    CHECK(mp.max_avg_power == doctest::Approx(worst).epsilon(1e-9));
    CHECK(mp.max_avg_power <= worst_pinv + 1e-9);
  }
}

TEST_CASE("fully determined vehicles leave no power slack") {
  ModuleParams p;
  p.k_th = 30.0;
  p.k_to = 1.5;
  const VehicleModel m = assemble_vehicle(fixture("quadrotor").config, p);
  const HoverSolution h = hover_vector(m);
  PowerModel pm;
  pm.u_h = h.u_h;
  const MinPowerResult mp = min_power_allocation(m, h.u_h, pm);
  const AllocationMatrix pinv = pseudo_inverse_allocation(m);
  double worst_pinv = 0.0;
  for (int i = 0; i < m.n; ++i)
    worst_pinv = std::max(worst_pinv, avg_power(pinv.C.row(i), h.u_h[i], pm.Sigma));
  CHECK(mp.max_avg_power == doctest::Approx(worst_pinv).epsilon(1e-6));
}

}  // TEST_SUITE
