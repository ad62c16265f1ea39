#include "mvflow/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mvflow::analysis {

MonitorRecord record(const flow::FlowLaw& law, const flow::FlowState& state) {
  const auto& curv = state.curvature;
  const int n = curv.n;
  const curvfun::CurvatureFunction f(law.spec, n);
  const double umbilic = std::pow(static_cast<double>(n), -n);
  const auto phi = flow::phi_values(law, curv);

  MonitorRecord r;
  r.t = state.t;
  r.step = state.step;
  r.phi_bar = state.phi_bar;
  r.min_q1 = r.min_q2 = r.f_min = std::numeric_limits<double>::infinity();
  r.speed_min = std::numeric_limits<double>::infinity();
  r.speed_max = -std::numeric_limits<double>::infinity();
  r.f_max = 0.0;
  for (std::size_t j = 0; j < curv.nodes(); ++j) {
    const auto lam = curv.lambda_at(j);
    const double fv = f.value(lam);
    double h = 0.0;
    for (double v : lam) h += v;
    double q1 = 1.0, q2 = 1.0;
    for (double v : lam) {
      q1 *= v / h;
      q2 *= v / fv;
    }
    r.min_q1 = std::min(r.min_q1, q1);
    r.min_q2 = std::min(r.min_q2, q2);
    r.f_max = std::max(r.f_max, umbilic - q1);
    r.f_min = std::min(r.f_min, fv);
    r.pinch_ratio = std::max(r.pinch_ratio, lam[n - 1] / lam[0]);
    r.phi_max = std::max(r.phi_max, phi[j]);
    const double s = state.phi_bar - phi[j];
    r.speed_min = std::min(r.speed_min, s);
    r.speed_max = std::max(r.speed_max, s);
  }

  r.volumes.resize(static_cast<std::size_t>(n + 2));
  for (int k = 0; k <= n + 1; ++k) {
    r.volumes[k] = geometry::mixed_volume(state.body, curv, n - k);
  }
  r.v_preserved = r.volumes[static_cast<std::size_t>(n - law.m_index)];

  const auto hc = geometry::centered_support(state.body);
  const auto [lo, hi] = std::minmax_element(hc.begin(), hc.end());
  r.rho_minus = *lo;
  r.rho_plus = *hi;
  const double eps = 0.25 * r.rho_minus;
  for (std::size_t j = 0; j < hc.size(); ++j) r.z_max = std::max(r.z_max, phi[j] / (hc[j] - eps));
  return r;
}

MonotonicityReport monotonicity_audit(std::span<const MonitorRecord> traj,
                                      curvfun::CurvatureClass speed_class, double tolerance) {
  MonotonicityReport rep;
  rep.tolerance = tolerance;
  rep.uses_q2 = speed_class == curvfun::CurvatureClass::Convex;
  auto q = [&](const MonitorRecord& r) { return rep.uses_q2 ? r.min_q2 : r.min_q1; };
  for (std::size_t i = 0; i < traj.size(); ++i) {
    rep.sup_phi_max = std::max(rep.sup_phi_max, traj[i].phi_max);
    if (i == 0) continue;
    const double rel = (q(traj[i]) - q(traj[i - 1])) / q(traj[i - 1]);
    if (rel < rep.worst_relative_decrease) {
      rep.worst_relative_decrease = rel;
      rep.worst_index = i;
    }
  }
  rep.passes = rep.worst_relative_decrease >= -tolerance;
  rep.phi_bounded = std::isfinite(rep.sup_phi_max);
  for (std::size_t i = traj.size() / 2 + 1; i < traj.size(); ++i) {
    if (traj[i].pinch_ratio > traj[i - 1].pinch_ratio * (1.0 + 1e-9)) {
      rep.pinch_nonincreasing_tail = false;
    }
  }
  return rep;
}

std::optional<DecayFit> fit_decay(std::span<const double> t, std::span<const double> q,
                                  double tolerance) {
  constexpr std::size_t kMinPoints = 20;
  if (t.size() != q.size() || q.size() < kMinPoints || !(q[0] > 0.0)) return std::nullopt;
  const double hi = 1e-2 * q[0];
  const double lo = 10.0 * tolerance;
  auto in_band = [&](std::size_t i) { return q[i] >= lo && q[i] <= hi; };

  std::size_t end = q.size();
  while (end > 0 && !in_band(end - 1)) --end;
  std::size_t begin = end;
  while (begin > 0 && in_band(begin - 1)) --begin;
  const std::size_t count = end - begin;
  if (count < kMinPoints) return std::nullopt;

  double mt = 0.0, my = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    mt += t[i];
    my += std::log(q[i]);
  }
  mt /= count;
  my /= count;
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    const double dt = t[i] - mt, dy = std::log(q[i]) - my;
    stt += dt * dt;
    sty += dt * dy;
    syy += dy * dy;
  }
  if (!(stt > 0.0) || !(syy > 0.0)) return std::nullopt;
  DecayFit fit;
  fit.rate = sty / stt;
  fit.r_squared = sty * sty / (stt * syy);
  fit.t_begin = t[begin];
  fit.t_end = t[end - 1];
  fit.count = count;
  return fit;
}

std::optional<DecayFit> fit_decay(std::span<const MonitorRecord> traj, DecayQuantity quantity,
                                  double tolerance) {
  std::vector<double> t, q;
  for (const auto& r : traj) {
    t.push_back(r.t);
    q.push_back(quantity == DecayQuantity::FMax ? r.f_max : r.pinch_ratio - 1.0);
  }
  return fit_decay(t, q, tolerance);
}

double limit_radius(int n, int m_index, double v_preserved) {
  return std::pow(v_preserved / geometry::unit_ball_volume(n + 1), 1.0 / (n - m_index));
}

LimitSphereReport limit_sphere_check(const flow::FlowState& final_state, const flow::FlowLaw& law,
                                     double v_initial) {
  LimitSphereReport rep;
  rep.r_star = limit_radius(law.n, law.m_index, v_initial);
  for (double v : geometry::centered_support(final_state.body)) {
    rep.max_relative_deviation =
        std::max(rep.max_relative_deviation, std::abs(v - rep.r_star) / rep.r_star);
  }
  const auto bounds = geometry::radii_bounds(final_state.body, final_state.curvature);
  rep.pinch_excess = bounds.pinch_ratio - 1.0;
  return rep;
}

RadiusRatioReport radius_ratio_check(std::span<const MonitorRecord> traj, int n) {
  RadiusRatioReport rep;
  const double c = (n + 2) / std::sqrt(2.0);
  for (const auto& r : traj) {
    rep.worst_margin = std::max(rep.worst_margin, (r.rho_plus / r.rho_minus) / (c * r.pinch_ratio));
  }
  rep.holds = rep.worst_margin <= 1.0;
  return rep;
}

DeltaCheck roundness_delta_check(const geometry::CurvatureField& curv, double epsilon, double delta,
                             double slack) {
  DeltaCheck out;
  out.min_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < curv.nodes(); ++j) {
    const auto lam = curv.lambda_at(j);
    double h = 0.0;
    for (double v : lam) h += v;
    if (lam[0] < epsilon * h) continue;
    const auto ratio = curvfun::roundness_ratio(lam);
    if (!ratio) continue;
    ++out.nodes_checked;
    out.min_ratio = std::min(out.min_ratio, *ratio);
  }
  out.holds = out.nodes_checked == 0 || out.min_ratio >= delta * (1.0 - slack);
  return out;
}

}  // namespace mvflow::analysis
