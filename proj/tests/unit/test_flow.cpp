#include <algorithm>
#include <cmath>
#include <numbers>

#include "../support/oracles.hpp"
#include "doctest.h"
#include "mvflow/analysis.hpp"
#include "mvflow/flow.hpp"

using namespace mvflow;
using namespace mvflow::flow;
using oracle::rel;
using std::numbers::pi;

namespace {

geometry::Body spheroid(int n, int N, double a = 1.0, double c = 1.6) {
  InitialBody init;
  init.a = init.b = a;
  init.c = c;
  return make_initial_body(init, {BackendKind::Axisym, N}, n);
}

geometry::Body round(int n, int N, double r) {
  InitialBody init;
  init.kind = InitialKind::Sphere;
  init.radius = r;
  return make_initial_body(init, {BackendKind::Axisym, N}, n);
}

FlowLaw law(curvfun::CurvatureSpec spec, int n, double beta, int m) { return {spec, n, beta, m}; }

double orthogonality(const FlowLaw& l, const FlowState& s) {
  const auto speed = speed_field(l, s.curvature, s.phi_bar);
  const int n = s.curvature.n;
  double sum = 0.0, scale = 0.0;
  for (std::size_t j = 0; j < speed.size(); ++j) {
    const double e = curvfun::elementary_symmetric_without(n - l.m_index - 1,
                                                           s.curvature.radii_at(j), -1) *
                     s.curvature.sphere_weight[j];
    sum += speed[j] * e;
    scale += std::abs(speed[j] * e);
  }
  return std::abs(sum) / std::max(scale, 1e-300);
}

}  // namespace

TEST_CASE("global term of a sphere is R^-beta") {
  for (int n : {2, 3}) {
    for (const auto& spec : curvfun::registry(n)) {
      for (double beta : {1.0, 2.0, 2.5}) {
        for (int m = -1; m <= n - 1; ++m) {
          const auto l = law(spec, n, beta, m);
          const auto s = make_state(l, round(n, 32, 1.7));
          CHECK(rel(s.phi_bar, std::pow(1.7, -beta)) < 1e-13);
        }
      }
    }
  }
}

TEST_CASE("global term for MeanH against an independent quadrature") {
  const auto l = law(curvfun::CurvatureSpec::mean_h(), 2, 1.0, -1);
  const auto s = make_state(l, spheroid(2, 256));
  const oracle::Spheroid sp{1.0, 1.6};
  // int (H/2) dmu / int dmu with H dmu = (R1 + R2) dsigma, dmu = R1 R2 dsigma.
  const double num = oracle::simpson(
      [&](double t) { return 0.5 * (sp.meridian_radius(t) + sp.rotational_radius(t)) * std::sin(t); },
      0, pi, 40960);
  const double den = oracle::simpson(
      [&](double t) { return sp.meridian_radius(t) * sp.rotational_radius(t) * std::sin(t); }, 0, pi,
      40960);
  CHECK(rel(s.phi_bar, num / den) < 1e-6);
  const auto phi = phi_values(l, s.curvature);
  const auto [lo, hi] = std::minmax_element(phi.begin(), phi.end());
  CHECK(s.phi_bar > *lo);
  CHECK(s.phi_bar < *hi);
}

TEST_CASE("speed is orthogonal to E_{m+1}") {
  for (int n : {2, 3}) {
    for (const auto& spec : curvfun::registry(n)) {
      for (int m = -1; m <= n - 1; ++m) {
        const auto l = law(spec, n, 1.5, m);
        const auto s = make_state(l, spheroid(n, 64));
        CHECK(orthogonality(l, s) < 1e-12);
      }
    }
  }
}

TEST_CASE("speed sign pattern on a prolate spheroid") {
  const auto l = law(curvfun::CurvatureSpec::mean_h(), 2, 1.0, -1);
  const auto s = make_state(l, spheroid(2, 128));
  const auto v = speed_field(l, s.curvature, s.phi_bar);
  CHECK(v[64] > 0.0);   // equator
  CHECK(v[0] < 0.0);    // poles
  CHECK(v[128] < 0.0);
}

TEST_CASE("sphere is a fixed point") {
  const auto l = law(curvfun::CurvatureSpec::gamma_k(2), 2, 2.0, 0);
  auto s = make_state(l, round(2, 64, 1.0));
  for (double v : speed_field(l, s.curvature, s.phi_bar)) CHECK(std::abs(v) <= 1e-14);
  const auto next = step(l, s, stable_dt(l, s, 0.25));
  for (double h : geometry::support(next.body)) CHECK(std::abs(h - 1.0) <= 1e-14);
}

TEST_CASE("stable dt") {
  const auto l = law(curvfun::CurvatureSpec::mean_h(), 2, 1.0, -1);
  const auto s = make_state(l, round(2, 256, 1.0));
  const double dth = pi / 256;
  CHECK(rel(stable_dt(l, s, 0.25), 0.25 * dth * dth) < 1e-14);

  for (double beta : {1.0, 2.0}) {
    const auto lb = law(curvfun::CurvatureSpec::norm_of_a(), 2, beta, -1);
    const double k = 1.8;
    const auto a = make_state(lb, spheroid(2, 64));
    const auto b = make_state(lb, spheroid(2, 64, k, k * 1.6));
    CHECK(rel(stable_dt(lb, b, 0.25), std::pow(k, beta + 1) * stable_dt(lb, a, 0.25)) < 1e-11);
  }
  const auto h1 = make_state(l, spheroid(2, 64));
  const auto h2 = make_state(l, spheroid(2, 128));
  const double ratio = stable_dt(l, h1, 0.25) / stable_dt(l, h2, 0.25);
  CHECK(ratio == doctest::Approx(4.0).epsilon(1e-3));
}

TEST_CASE("stable dt is stable and a much larger dt is not") {
  const auto l = law(curvfun::CurvatureSpec::mean_h(), 2, 1.0, -1);
  auto stable = make_state(l, spheroid(2, 64));
  for (int i = 0; i < 2000; ++i) stable = step(l, stable, stable_dt(l, stable, 0.25));
  const auto rec = analysis::record(l, stable);
  CHECK(rec.f_max < analysis::record(l, make_state(l, spheroid(2, 64))).f_max);

  auto unstable = make_state(l, spheroid(2, 64));
  const double dt = 40.0 * stable_dt(l, unstable, 1.0);
  bool blew_up = false;
  try {
    for (int i = 0; i < 400; ++i) {
      unstable = step(l, unstable, dt);
      if (!std::isfinite(unstable.phi_bar)) break;
    }
  } catch (const ConvexityLoss&) {
    blew_up = true;
  }
  CHECK(blew_up);
}

TEST_CASE("per-step drift rate is set by the spatial error") {
  // The semi-discrete volume is conserved only up to the quadrature error,
  // so one step drifts by dt times a rate that shrinks with the grid.
  const auto l = law(curvfun::CurvatureSpec::mean_h(), 2, 1.0, -1);
  auto rate = [&](int N, double dt) {
    const auto s = make_state(l, spheroid(2, N, 1.0, 2.0));
    const double v0 = geometry::mixed_volume(s.body, s.curvature, -1);
    const auto n = step(l, s, dt);
    return std::abs(geometry::mixed_volume(n.body, n.curvature, -1) - v0) / v0 / dt;
  };
  const double dt = 1e-5;
  const double r64 = rate(64, dt), r128 = rate(128, dt);
  CHECK(r64 < 1e-4);
  CHECK(rel(rate(64, dt / 2), r64) < 1e-2);
  CHECK(std::log2(r64 / r128) >= 1.9);
}

TEST_CASE("translation equivariance") {
  const auto l = law(curvfun::CurvatureSpec::quotient(2, 0), 2, 1.0, 0);
  const auto body = spheroid(2, 128);
  const double v[] = {0.25};
  const auto a = make_state(l, body);
  const auto b = make_state(l, geometry::translate(body, v));
  const double dt = stable_dt(l, a, 0.25);
  const auto na = step(l, a, dt), nb = step(l, b, dt);
  const auto ha = geometry::support(na.body), hb = geometry::support(nb.body);
  for (int j = 0; j <= 128; ++j) {
    CHECK(std::abs(hb[j] - ha[j] - 0.25 * std::cos(j * pi / 128)) < 1e-12);
  }
}

TEST_CASE("integral identity") {
  const auto l = law(curvfun::CurvatureSpec::mean_h(), 2, 1.0, -1);
  const auto sphere = make_state(l, round(2, 64, 1.0));
  for (int m = 0; m <= 1; ++m) {
    const auto c = integral_identity_check(l, sphere, m);
    CHECK(c.absolute);
    CHECK(c.residual <= 1e-10);
  }
  CHECK(integral_identity_check(l, sphere, 2).skipped);
  CHECK_THROWS_AS(integral_identity_check(l, sphere, 3), DomainError);

  const auto e = make_state(l, spheroid(2, 256));
  const auto c = integral_identity_check(l, e, 0);
  CHECK_FALSE(c.absolute);
  CHECK(c.residual <= 1e-2);
  // With phi_bar_0 the preserved integral has zero derivative.
  const auto c0 = integral_identity_check(l, e, 0, 0);
  CHECK(std::abs(c0.rhs) < 1e-12);
  CHECK(std::abs(c0.lhs) < 1e-6);
}

TEST_CASE("initial bodies") {
  const BackendConfig axis{BackendKind::Axisym, 64};
  InitialBody p;
  p.kind = InitialKind::Perturbed;
  p.degree = 3;
  p.amplitude = 0.05;
  const auto body = make_initial_body(p, axis, 2);
  const auto h = geometry::support(body);
  CHECK(*std::max_element(h.begin(), h.end()) == doctest::Approx(1.05));
  p.amplitude = 0.9;
  p.degree = 8;
  CHECK_THROWS_AS(make_initial_body(p, axis, 2), ConfigError);

  InitialBody r;
  r.kind = InitialKind::Random;
  r.degree = 4;
  r.amplitude = 0.05;
  const auto r1 = make_initial_body(r, {BackendKind::Sphere2D, 16}, 2, 9);
  const auto r2 = make_initial_body(r, {BackendKind::Sphere2D, 16}, 2, 9);
  const auto r3 = make_initial_body(r, {BackendKind::Sphere2D, 16}, 2, 10);
  CHECK(std::ranges::equal(geometry::support(r1), geometry::support(r2)));
  CHECK_FALSE(std::ranges::equal(geometry::support(r1), geometry::support(r3)));

  InitialBody e;
  e.kind = InitialKind::Ellipsoid;
  e.a = 1.0;
  e.b = 1.2;
  CHECK_THROWS_AS(make_initial_body(e, axis, 2), ConfigError);
  CHECK_NOTHROW(make_initial_body(e, {BackendKind::Sphere2D, 16}, 2));
  CHECK_THROWS_AS(make_initial_body(e, {BackendKind::Sphere2D, 16}, 3), ConfigError);
}

TEST_CASE("config validation happens before stepping") {
  FlowConfig c;
  c.beta = 0.5;
  try {
    run(c);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("beta >= 1") != std::string::npos);
  }
  c = FlowConfig{};
  c.m_index = 2;
  CHECK_THROWS_AS(run(c), ConfigError);
  c = FlowConfig{};
  c.spec = curvfun::CurvatureSpec::gamma_k(3);
  CHECK_THROWS_AS(run(c), ConfigError);
  c = FlowConfig{};
  c.cfl_safety = 1.5;
  CHECK_THROWS_AS(run(c), ConfigError);
  c = FlowConfig{};
  c.backend.resolution = 8;
  CHECK_THROWS_AS(run(c), ConfigError);
}

TEST_CASE("sphere run converges at the first record") {
  FlowConfig c;
  c.initial.kind = InitialKind::Sphere;
  c.backend.resolution = 32;
  const auto r = run(c);
  CHECK(r.termination == Termination::Converged);
  CHECK(r.final_state.step == 0);
  REQUIRE(r.trajectory.size() == 1);
  CHECK(r.trajectory[0].f_max == 0.0);
}

TEST_CASE("spheroid run converges to the volume-preserving sphere") {
  FlowConfig c;
  c.backend.resolution = 64;
  c.cadence = 10;
  const auto r = run(c);
  REQUIRE(r.termination == Termination::Converged);
  const double v0 = oracle::Spheroid{1.0, 1.6}.volume(2);
  const auto ls = analysis::limit_sphere_check(r.final_state, c.law(), v0);
  CHECK(rel(ls.r_star, std::cbrt(1.6)) < 1e-12);
  CHECK(ls.max_relative_deviation < 1e-3);
  CHECK(r.trajectory.back().f_max < c.f_tolerance);
  for (std::size_t i = 1; i < r.trajectory.size(); ++i) {
    CHECK(r.trajectory[i].t > r.trajectory[i - 1].t);
  }
}

TEST_CASE("NormOfA with beta = 2 converges with decaying deficit") {
  FlowConfig c;
  c.spec = curvfun::CurvatureSpec::norm_of_a();
  c.beta = 2.0;
  c.backend.resolution = 48;
  c.cadence = 10;
  const auto r = run(c);
  REQUIRE(r.termination == Termination::Converged);
  const auto fit = analysis::fit_decay(r.trajectory, analysis::DecayQuantity::FMax, c.f_tolerance);
  REQUIRE(fit);
  CHECK(fit->rate < 0.0);
}

TEST_CASE("run terminations other than convergence") {
  FlowConfig c;
  c.backend.resolution = 32;
  c.max_steps = 5;
  c.cadence = 2;
  auto r = run(c);
  CHECK(r.termination == Termination::MaxSteps);
  CHECK(r.final_state.step == 5);
  CHECK(r.trajectory.back().step == 5);

  c.max_steps = 1'000'000;
  c.t_end = 0.01;
  r = run(c);
  CHECK(r.termination == Termination::TimeLimit);
  CHECK(r.final_state.t == doctest::Approx(0.01).epsilon(1e-12));

  // At the stability limit itself the scheme settles into an oscillation
  // and never meets the tolerance.
  c.t_end = 20;
  c.cfl_safety = 1.0;
  c.initial.c = 3.0;
  c.backend.resolution = 32;
  r = run(c);
  CHECK(r.termination != Termination::Converged);
  if (r.termination == Termination::ConvexityLoss) CHECK(r.failed_node.has_value());
}

TEST_CASE("step reports convexity loss") {
  const auto l = law(curvfun::CurvatureSpec::mean_h(), 2, 1.0, -1);
  const auto s = make_state(l, spheroid(2, 32, 1.0, 3.0));
  CHECK_THROWS_AS(step(l, s, 1e3), ConvexityLoss);
}

TEST_CASE("runs are bitwise deterministic") {
  FlowConfig c;
  c.spec = curvfun::CurvatureSpec::power_mean(-1);
  c.backend.resolution = 32;
  c.cadence = 7;
  c.max_steps = 500;
  const auto a = run(c), b = run(c);
  REQUIRE(a.trajectory.size() == b.trajectory.size());
  for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
    CHECK(a.trajectory[i].f_max == b.trajectory[i].f_max);
    CHECK(a.trajectory[i].v_preserved == b.trajectory[i].v_preserved);
  }
  CHECK(std::ranges::equal(geometry::support(a.final_state.body), geometry::support(b.final_state.body)));
}

TEST_CASE("lat-long backend keeps axisymmetric data axisymmetric") {
  FlowConfig c;
  c.backend = {BackendKind::Sphere2D, 24, 48};
  c.max_steps = 1000;
  c.cadence = 100;
  c.t_end = 1e9;
  const auto r = run(c);
  const auto& g = std::get<geometry::SphereGrid2D>(r.final_state.body);
  double worst = 0.0;
  for (int row = 1; row < g.n_theta(); ++row) {
    for (int col = 1; col < g.n_phi(); ++col) worst = std::max(worst, std::abs(g.at(row, col) - g.at(row, 0)));
  }
  CHECK(worst <= 1e-10);
  CHECK(r.final_state.step == 1000);
}

TEST_CASE("lat-long ellipsoid run conserves volume and rounds up") {
  FlowConfig c;
  c.backend = {BackendKind::Sphere2D, 16, 32};
  c.initial.kind = InitialKind::Ellipsoid;
  c.initial.a = 1.0;
  c.initial.b = 1.15;
  c.initial.c = 1.3;
  c.cadence = 20;
  c.f_tolerance = 1e-6;
  const auto r = run(c);
  REQUIRE(r.termination == Termination::Converged);
  const double v0 = r.trajectory.front().v_preserved;
  // Second-order backend on a coarse grid.
  for (const auto& rec : r.trajectory) CHECK(rel(rec.v_preserved, v0) < 2.5e-3);
}
