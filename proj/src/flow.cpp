#include "mvflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "mvflow/analysis.hpp"
#include "mvflow/rng.hpp"

namespace mvflow::flow {

namespace {

using geometry::Body;
using geometry::CurvatureField;

// Phi per node together with the global term of index m.
struct SpeedEval {
  std::vector<double> phi;
  double phi_bar = 0.0;
};

// E_{m+1} dmu per node, as E_{n-m-1}(R) dsigma.
std::vector<double> weighted_e(const CurvatureField& curv, int m_index) {
  const int n = curv.n;
  std::vector<double> out(curv.nodes());
  for (std::size_t j = 0; j < curv.nodes(); ++j) {
    out[j] = curv.sphere_weight[j] *
             curvfun::elementary_symmetric_without(n - m_index - 1, curv.radii_at(j), -1);
  }
  return out;
}

double average(std::span<const double> values, std::span<const double> weights) {
  std::vector<double> terms(values.size());
  for (std::size_t j = 0; j < values.size(); ++j) terms[j] = values[j] * weights[j];
  const double den = geometry::pairwise_sum(weights);
  if (!(den > 0.0)) throw std::logic_error("degenerate global-term denominator");
  return geometry::pairwise_sum(terms) / den;
}

SpeedEval evaluate(const FlowLaw& law, const CurvatureField& curv, int m_index) {
  SpeedEval e;
  e.phi = phi_values(law, curv);
  e.phi_bar = average(e.phi, weighted_e(curv, m_index));
  return e;
}

Body advanced(const Body& body, std::span<const double> base, std::span<const double> speed,
              double dt) {
  std::vector<double> h(base.size());
  for (std::size_t j = 0; j < h.size(); ++j) {
    h[j] = base[j] + dt * speed[j];
    if (!(h[j] > 0.0)) throw ConvexityLoss(j, h[j]);
  }
  return geometry::with_support(body, std::move(h));
}

}  // namespace

void FlowLaw::validate() const {
  if (n < 2) throw ConfigError("n must be >= 2");
  if (!(beta >= 1.0)) {
    throw ConfigError("beta must satisfy beta >= 1");
  }
  if (m_index < -1 || m_index > n - 1) {
    throw ConfigError("m_index must lie in -1..n-1");
  }
  try {
    spec.validate(n);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
}

FlowState make_state(const FlowLaw& law, Body body, double t, long step) {
  auto curv = geometry::curvatures(body);
  const double phi_bar = evaluate(law, curv, law.m_index).phi_bar;
  return FlowState{t, step, std::move(body), std::move(curv), phi_bar};
}

std::vector<double> phi_values(const FlowLaw& law, const CurvatureField& curv) {
  const curvfun::CurvatureFunction f(law.spec, curv.n);
  std::vector<double> out(curv.nodes());
  const bool linear = law.beta == 1.0;
  for (std::size_t j = 0; j < curv.nodes(); ++j) {
    const double v = f.value(curv.lambda_at(j));
    out[j] = linear ? v : std::pow(v, law.beta);
  }
  return out;
}

double global_term(const FlowLaw& law, const CurvatureField& curv, int m_index) {
  if (m_index < -1 || m_index > curv.n - 1) throw DomainError("global term index out of range");
  return evaluate(law, curv, m_index).phi_bar;
}

std::vector<double> speed_field(const FlowLaw& law, const CurvatureField& curv, double phi_bar) {
  auto s = phi_values(law, curv);
  for (auto& v : s) v = phi_bar - v;
  return s;
}

double stable_dt(const FlowLaw& law, const FlowState& state, double cfl_safety) {
  const auto& curv = state.curvature;
  const curvfun::CurvatureFunction f(law.spec, curv.n);
  std::vector<double> grad(static_cast<std::size_t>(curv.n));
  double coeff = 0.0;
  for (std::size_t j = 0; j < curv.nodes(); ++j) {
    const auto lam = curv.lambda_at(j);
    const double fv = f.value_and_gradient(lam, grad);
    double gsum = 0.0;
    for (double g : grad) gsum += g;
    const double lmax = lam[lam.size() - 1];  // 1 / min R
    coeff = std::max(coeff, law.beta * std::pow(fv, law.beta - 1.0) * gsum * lmax * lmax);
  }
  const double dx = geometry::stability_spacing(state.body);
  return cfl_safety * dx * dx / coeff;
}

FlowState step(const FlowLaw& law, const FlowState& state, double dt) {
  const auto h0 = geometry::support(state.body);
  const auto s1 = speed_field(law, state.curvature, state.phi_bar);
  const auto mid_body = advanced(state.body, h0, s1, 0.5 * dt);
  const auto mid_curv = geometry::curvatures(mid_body);
  const auto mid = evaluate(law, mid_curv, law.m_index);
  auto s2 = mid.phi;
  for (auto& v : s2) v = mid.phi_bar - v;
  return make_state(law, advanced(state.body, h0, s2, dt), state.t + dt, state.step + 1);
}

IdentityCheck integral_identity_check(const FlowLaw& law, const FlowState& state, int m,
                                      std::optional<int> phi_bar_index) {
  const int n = law.n;
  if (m < 0 || m > n) throw DomainError("identity index m must lie in 0..n");
  IdentityCheck out;
  if (m == n) {
    out.skipped = true;
    out.absolute = true;
    return out;
  }
  const int idx = phi_bar_index.value_or(-1);
  const auto& curv = state.curvature;
  const auto eval = evaluate(law, curv, idx);
  std::vector<double> s(eval.phi.size());
  double smax = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    s[j] = eval.phi_bar - eval.phi[j];
    smax = std::max(smax, std::abs(s[j]));
  }

  const auto ew = weighted_e(curv, m);  // E_{m+1} dmu
  std::vector<double> terms(s.size()), abs_terms(s.size());
  for (std::size_t j = 0; j < s.size(); ++j) {
    terms[j] = s[j] * ew[j];
    abs_terms[j] = std::abs(terms[j]);
  }
  out.rhs = (m + 1) * geometry::pairwise_sum(terms);
  const double scale = (m + 1) * geometry::pairwise_sum(abs_terms);

  const auto h = geometry::support(state.body);
  if (smax > 0.0) {
    const double hmax = *std::max_element(h.begin(), h.end());
    const double tau = 1e-3 * hmax / smax;
    auto integral = [&](double step_size) {
      return geometry::curvature_integral(
          geometry::curvatures(advanced(state.body, h, s, step_size)), m);
    };
    auto central = [&](double d) { return (integral(d) - integral(-d)) / (2.0 * d); };
    out.lhs = (4.0 * central(0.5 * tau) - central(tau)) / 3.0;
  }

  const double reference = (m + 1) * geometry::pairwise_sum(ew) * (smax > 0.0 ? smax : 1.0);
  out.absolute = !(scale > 1e-12 * reference);
  out.residual = out.absolute ? std::abs(out.lhs - out.rhs) : std::abs(out.lhs - out.rhs) / scale;
  return out;
}

// ---------------------------------------------------------------------------

std::string to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "converged";
    case Termination::ConvexityLoss: return "convexity_loss";
    case Termination::MaxSteps: return "max_steps";
    case Termination::TimeLimit: return "time_limit";
  }
  return "unknown";
}

void FlowConfig::validate() const {
  law().validate();
  if (backend.kind == BackendKind::Sphere2D) {
    if (n != 2) throw ConfigError("sphere2d backend requires n = 2");
    if (backend.resolution < 4) throw ConfigError("sphere2d resolution must be >= 4");
    const int nphi = backend.n_phi > 0 ? backend.n_phi : 2 * backend.resolution;
    if (nphi < 4 || nphi % 2 != 0) throw ConfigError("n_phi must be even and >= 4");
  } else if (backend.resolution < 16) {
    throw ConfigError("axisym resolution must be >= 16");
  }
  if (!(cfl_safety > 0.0 && cfl_safety <= 1.0)) throw ConfigError("cfl_safety must lie in (0, 1]");
  if (!(t_end > 0.0)) throw ConfigError("t_end must be positive");
  if (max_steps < 0) throw ConfigError("max_steps must be non-negative");
  if (!(f_tolerance > 0.0)) throw ConfigError("f_tolerance must be positive");
  if (cadence < 1) throw ConfigError("cadence must be >= 1");
  if (converge_window < 1) throw ConfigError("converge_window must be >= 1");
  if (snapshot_every < 0) throw ConfigError("snapshot_every must be non-negative");
  const auto& i = initial;
  if (!(i.radius > 0.0 && i.a > 0.0 && i.b > 0.0 && i.c > 0.0)) {
    throw ConfigError("initial body dimensions must be positive");
  }
  if ((i.kind == InitialKind::Perturbed || i.kind == InitialKind::Random) &&
      (i.degree < 0 || !(std::abs(i.amplitude) < 1.0))) {
    throw ConfigError("perturbation needs degree >= 0 and |amplitude| < 1");
  }
}

geometry::Body make_initial_body(const InitialBody& init, const BackendConfig& backend, int n,
                                 std::uint64_t seed) {
  using std::numbers::pi;
  const bool axisym = backend.kind == BackendKind::Axisym;
  if (!axisym && n != 2) throw ConfigError("sphere2d backend requires n = 2");
  if (axisym && init.kind == InitialKind::Ellipsoid && init.a != init.b) {
    throw ConfigError("axisymmetric backend needs a == b for an ellipsoid");
  }

  // Random smooth perturbation: seeded coefficients for degrees 2..degree.
  std::vector<double> coeffs;
  if (init.kind == InitialKind::Random) {
    Rng rng(seed);
    const int terms = axisym ? init.degree + 1 : (init.degree + 1) * (2 * init.degree + 1);
    for (int i = 0; i < terms; ++i) coeffs.push_back(rng.uniform(-1.0, 1.0));
  }

  // Harmonic part evaluated at (theta, phi); normalised below by its sup.
  auto harmonic = [&](double theta, double phi) {
    if (init.kind == InitialKind::Perturbed) {
      if (axisym) return std::legendre(static_cast<unsigned>(init.degree), std::cos(theta));
      const int m = std::abs(init.order);
      const double p = std::sph_legendre(static_cast<unsigned>(init.degree),
                                         static_cast<unsigned>(m), theta);
      return init.order >= 0 ? p * std::cos(m * phi) : p * std::sin(m * phi);
    }
    double v = 0.0;
    std::size_t c = 0;
    for (int l = 2; l <= init.degree; ++l) {
      if (axisym) {
        v += coeffs[c++] * std::legendre(static_cast<unsigned>(l), std::cos(theta));
        continue;
      }
      for (int m = -l; m <= l; ++m) {
        const double p = std::sph_legendre(static_cast<unsigned>(l),
                                           static_cast<unsigned>(std::abs(m)), theta);
        v += coeffs[c++] * (m >= 0 ? p * std::cos(m * phi) : p * std::sin(-m * phi));
      }
    }
    return v;
  };

  auto base = [&](double theta, double phi) {
    const double st = std::sin(theta), ct = std::cos(theta);
    switch (init.kind) {
      case InitialKind::Sphere:
      case InitialKind::Perturbed:
      case InitialKind::Random: return init.radius;
      case InitialKind::Spheroid:
        return std::sqrt(init.a * init.a * st * st + init.c * init.c * ct * ct);
      case InitialKind::Ellipsoid: {
        const double ux = st * std::cos(phi), uy = st * std::sin(phi);
        return std::sqrt(init.a * init.a * ux * ux + init.b * init.b * uy * uy +
                         init.c * init.c * ct * ct);
      }
    }
    return init.radius;
  };

  // Sample positions.
  std::vector<std::pair<double, double>> points;
  int n_phi = 0;
  if (axisym) {
    for (int j = 0; j <= backend.resolution; ++j) points.emplace_back(j * pi / backend.resolution, 0.0);
  } else {
    const int nt = backend.resolution;
    n_phi = backend.n_phi > 0 ? backend.n_phi : 2 * nt;
    points.emplace_back(0.0, 0.0);
    for (int j = 1; j < nt; ++j) {
      for (int k = 0; k < n_phi; ++k) points.emplace_back(j * pi / nt, k * 2.0 * pi / n_phi);
    }
    points.emplace_back(pi, 0.0);
  }

  std::vector<double> h(points.size());
  const bool perturbed = init.kind == InitialKind::Perturbed || init.kind == InitialKind::Random;
  std::vector<double> y(points.size(), 0.0);
  double ysup = 0.0;
  if (perturbed) {
    for (std::size_t j = 0; j < points.size(); ++j) {
      y[j] = harmonic(points[j].first, points[j].second);
      ysup = std::max(ysup, std::abs(y[j]));
    }
  }
  for (std::size_t j = 0; j < points.size(); ++j) {
    h[j] = base(points[j].first, points[j].second);
    if (perturbed && ysup > 0.0) h[j] *= 1.0 + init.amplitude * y[j] / ysup;
  }

  try {
    geometry::Body body = axisym ? geometry::Body(geometry::AxisymProfile(n, std::move(h)))
                                 : geometry::Body(geometry::SphereGrid2D(backend.resolution,
                                                                         n_phi, std::move(h)));
    geometry::curvatures(body);  // amplitude guard
    return body;
  } catch (const ConvexityLoss& e) {
    throw ConfigError(std::string("initial body is not strictly convex: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("invalid initial body: ") + e.what());
  }
}

RunResult run(const FlowConfig& config, const RunHooks& hooks) {
  config.validate();
  const auto law = config.law();
  FlowState state = [&] {
    auto body = make_initial_body(config.initial, config.backend, config.n, config.seed);
    try {
      return make_state(law, std::move(body));
    } catch (const ConvexityLoss& e) {
      throw ConfigError(std::string("initial body is not strictly convex: ") + e.what());
    }
  }();

  std::vector<analysis::MonitorRecord> trajectory;
  auto emit = [&](double dt) {
    auto rec = analysis::record(law, state);
    rec.dt = dt;
    if (!trajectory.empty()) {
      const auto& prev = trajectory.back();
      rec.f_min_integral = prev.f_min_integral + 0.5 * (prev.f_min + rec.f_min) * (rec.t - prev.t);
    }
    trajectory.push_back(rec);
    if (hooks.on_record) hooks.on_record(trajectory.back());
  };

  if (hooks.on_snapshot) hooks.on_snapshot(state);
  std::optional<Termination> reason;
  std::optional<std::size_t> failed_node;
  std::optional<double> failed_value;
  int below = 0;
  double dt = 0.0;
  while (!reason) {
    if (state.step % config.cadence == 0) {
      emit(dt);
      below = trajectory.back().f_max < config.f_tolerance ? below + 1 : 0;
      if ((trajectory.size() == 1 && below == 1) || below >= config.converge_window) {
        reason = Termination::Converged;
        break;
      }
    }
    if (state.t >= config.t_end * (1.0 - 1e-15)) {
      reason = Termination::TimeLimit;
      break;
    }
    if (state.step >= config.max_steps) {
      reason = Termination::MaxSteps;
      break;
    }
    dt = std::min(stable_dt(law, state, config.cfl_safety), config.t_end - state.t);
    try {
      state = step(law, state, dt);
    } catch (const ConvexityLoss& e) {
      reason = Termination::ConvexityLoss;
      failed_node = e.node();
      failed_value = e.value();
      break;
    }
    if (hooks.on_snapshot && config.snapshot_every > 0 && state.step % config.snapshot_every == 0) {
      hooks.on_snapshot(state);
    }
  }
  if (trajectory.back().step != state.step) emit(dt);
  if (hooks.on_snapshot && !(config.snapshot_every > 0 && state.step % config.snapshot_every == 0 &&
                             state.step > 0)) {
    hooks.on_snapshot(state);
  }
  return RunResult{std::move(trajectory), std::move(state), *reason, failed_node, failed_value};
}

}  // namespace mvflow::flow
