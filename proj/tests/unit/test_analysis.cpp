#include <cmath>
#include <limits>
#include <numbers>

#include "../support/oracles.hpp"
#include "doctest.h"
#include "mvflow/analysis.hpp"
#include "mvflow/flow.hpp"

using namespace mvflow;
using namespace mvflow::analysis;
using oracle::rel;
using std::numbers::pi;

namespace {

flow::FlowState state_of(const flow::FlowLaw& law, flow::InitialBody init, int N) {
  return flow::make_state(law, flow::make_initial_body(init, {flow::BackendKind::Axisym, N}, law.n));
}

flow::InitialBody sphere(double r = 1.0) {
  flow::InitialBody b;
  b.kind = flow::InitialKind::Sphere;
  b.radius = r;
  return b;
}

MonitorRecord rec(double t, double q1, double q2, double pinch = 1.0) {
  MonitorRecord r;
  r.t = t;
  r.min_q1 = q1;
  r.min_q2 = q2;
  r.pinch_ratio = pinch;
  r.phi_max = 1.0;
  return r;
}

}  // namespace

TEST_CASE("record of the unit sphere") {
  const flow::FlowLaw law{curvfun::CurvatureSpec::mean_h(), 2, 1.0, -1};
  const auto r = record(law, state_of(law, sphere(), 32));
  CHECK(r.min_q1 == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(std::abs(r.f_max) < 1e-15);
  CHECK(r.pinch_ratio == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(r.speed_min) < 1e-14);
  CHECK(std::abs(r.speed_max) < 1e-14);
  CHECK(r.rho_minus == doctest::Approx(1.0));
  CHECK(r.rho_plus == doctest::Approx(1.0));
  // Tso quantity Phi / (h - rho/4) = 1 / (3/4).
  CHECK(r.z_max == doctest::Approx(4.0 / 3.0));
  REQUIRE(r.volumes.size() == 4);
  for (double v : r.volumes) CHECK(rel(v, 4.0 * pi / 3.0) < 1e-13);
}

TEST_CASE("record invariants on a spheroid") {
  for (int n : {2, 3, 4}) {
    for (const auto& spec : curvfun::registry(n)) {
      const flow::FlowLaw law{spec, n, 1.0, -1};
      flow::InitialBody b;
      const auto r = record(law, state_of(law, b, 64));
      const double umb = std::pow(double(n), -n);
      CHECK(r.min_q1 > 0.0);
      CHECK(r.min_q1 <= umb);
      CHECK(r.f_max >= 0.0);
      CHECK(r.f_max == doctest::Approx(umb - r.min_q1));
      CHECK(r.rho_minus <= r.rho_plus);
      CHECK(std::isfinite(r.z_max));
      CHECK(r.v_preserved == r.volumes[n + 1]);
      CHECK(r.speed_min < 0.0);
      CHECK(r.speed_max > 0.0);
    }
  }
}

TEST_CASE("min Q1 on the spheroid against dense closed-form sampling") {
  const flow::FlowLaw law{curvfun::CurvatureSpec::mean_h(), 2, 1.0, -1};
  const auto r = record(law, state_of(law, flow::InitialBody{}, 256));
  const oracle::Spheroid s{1.0, 1.6};
  double best = 1.0;
  for (int i = 0; i <= 100000; ++i) {
    const double t = i * pi / 100000;
    const double l1 = 1.0 / s.meridian_radius(t), l2 = 1.0 / s.rotational_radius(t);
    best = std::min(best, l1 * l2 / ((l1 + l2) * (l1 + l2)));
  }
  CHECK(rel(r.min_q1, best) < 1e-6);
}

TEST_CASE("monotonicity audit") {
  std::vector<MonitorRecord> flat(5, rec(0, 0.25, 1.0));
  for (int i = 0; i < 5; ++i) flat[i].t = i;
  const auto a = monotonicity_audit(flat, curvfun::CurvatureClass::Concave);
  CHECK(a.passes);
  CHECK(a.worst_relative_decrease == 0.0);
  CHECK_FALSE(a.uses_q2);

  std::vector<MonitorRecord> dip{rec(0, 0.2, 0.9), rec(1, 0.21, 0.8), rec(2, 0.22, 0.95)};
  const auto convex = monotonicity_audit(dip, curvfun::CurvatureClass::Convex);
  CHECK(convex.uses_q2);
  CHECK_FALSE(convex.passes);
  CHECK(convex.worst_index == 1);
  CHECK(convex.worst_relative_decrease == doctest::Approx(-0.1 / 0.9));
  CHECK(monotonicity_audit(dip, curvfun::CurvatureClass::Concave).passes);

  std::vector<MonitorRecord> pinch{rec(0, 1, 1, 2.0), rec(1, 1, 1, 1.5), rec(2, 1, 1, 1.2),
                                   rec(3, 1, 1, 1.3)};
  CHECK_FALSE(monotonicity_audit(pinch, curvfun::CurvatureClass::Convex).pinch_nonincreasing_tail);
  pinch[3].pinch_ratio = 1.1;
  CHECK(monotonicity_audit(pinch, curvfun::CurvatureClass::Convex).pinch_nonincreasing_tail);

  std::vector<MonitorRecord> inf{rec(0, 1, 1)};
  inf[0].phi_max = std::numeric_limits<double>::infinity();
  CHECK_FALSE(monotonicity_audit(inf, curvfun::CurvatureClass::Convex).phi_bounded);
}

TEST_CASE("fit_decay recovers exact exponential rates") {
  for (double alpha : {0.5, 2.9, 7.0}) {
    std::vector<double> t, q;
    for (int i = 0; i < 400; ++i) {
      t.push_back(0.01 * i * 10.0 / alpha);
      q.push_back(0.3 * std::exp(-alpha * t.back()));
    }
    const auto fit = fit_decay(t, q, 1e-12);
    REQUIRE(fit);
    CHECK(rel(fit->rate, -alpha) < 1e-6);
    CHECK(fit->r_squared > 1.0 - 1e-12);
    CHECK(fit->count >= 20);
  }
}

TEST_CASE("fit_decay uses the band window") {
  std::vector<double> t, q;
  for (int i = 0; i < 200; ++i) {
    t.push_back(i * 0.1);
    q.push_back(std::max(std::exp(-t.back()), 1e-9));
  }
  const auto fit = fit_decay(t, q, 1e-9);
  REQUIRE(fit);
  CHECK(rel(fit->rate, -1.0) < 1e-9);
  CHECK(fit->t_begin >= std::log(100.0) - 0.1);
  CHECK(fit->t_end <= -std::log(1e-8) + 0.1);
}

TEST_CASE("fit_decay reports unavailable fits") {
  std::vector<double> t(50), q(50, 0.01);
  for (int i = 0; i < 50; ++i) t[i] = i;
  CHECK_FALSE(fit_decay(t, q, 1e-8).has_value());
  std::vector<double> t2(10), q2(10);
  for (int i = 0; i < 10; ++i) {
    t2[i] = i;
    q2[i] = std::exp(-double(i));
  }
  CHECK_FALSE(fit_decay(t2, q2, 1e-12).has_value());
}

TEST_CASE("limit radius and sphere check") {
  CHECK(rel(limit_radius(2, -1, 4.0 * pi / 3.0), 1.0) < 1e-15);
  const double v = 4.0 * pi / 3.0 * 1.6;
  const double r1 = limit_radius(2, -1, v), r2 = limit_radius(2, -1, 8.0 * v);
  CHECK(rel(r2, 2.0 * r1) < 1e-15);
  CHECK(rel(limit_radius(3, 0, 2.0 * 2.0 * 2.0 * oracle::ball_volume(4)), 2.0) < 1e-15);

  const flow::FlowLaw law{curvfun::CurvatureSpec::mean_h(), 2, 1.0, -1};
  const auto s = state_of(law, sphere(1.3), 64);
  const auto rep = limit_sphere_check(s, law, 4.0 * pi / 3.0 * std::pow(1.3, 3));
  CHECK(rep.max_relative_deviation < 1e-10);
  CHECK(std::abs(rep.pinch_excess) < 1e-10);
}

TEST_CASE("radius ratio check") {
  std::vector<MonitorRecord> t{rec(0, 1, 1, 1.0)};
  t[0].rho_minus = 1.0;
  t[0].rho_plus = 2.8;
  CHECK(radius_ratio_check(t, 2).holds);
  CHECK(radius_ratio_check(t, 2).worst_margin == doctest::Approx(2.8 / (2.0 * std::sqrt(2.0))));
  t[0].rho_plus = 2.9;
  CHECK_FALSE(radius_ratio_check(t, 2).holds);
}

TEST_CASE("sampled delta holds pointwise on a spheroid") {
  for (int n : {2, 3}) {
    const flow::FlowLaw law{curvfun::CurvatureSpec::mean_h(), n, 1.0, -1};
    const auto s = state_of(law, flow::InitialBody{}, 128);
    for (double eps : {0.1, 0.2}) {
      const double e[] = {eps};
      const auto rep = curvfun::sample_inequalities(n, 20000, 4, e);
      // A sampled minimum only bounds the infimum from above.
      const auto check = roundness_delta_check(s.curvature, eps, rep.deltas[0].delta, 1e-2);
      CHECK(check.holds);
    }
  }
  const flow::FlowLaw law{curvfun::CurvatureSpec::mean_h(), 2, 1.0, -1};
  const auto s = state_of(law, flow::InitialBody{}, 64);
  CHECK_FALSE(roundness_delta_check(s.curvature, 0.1, 5.0).holds);
  CHECK(roundness_delta_check(s.curvature, 0.1, 3.9).holds);
}
