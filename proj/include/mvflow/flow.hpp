#pragma once

// Mixed-volume preserving F^beta flow in support-function form. Along the
// flow the support function evolves by the normal speed,
//
//   d/dt h(u) = phi_bar_m(t) - F(lambda(u))^beta,
//
// where phi_bar_m is the E_{m+1}-weighted surface average of F^beta, which
// keeps V_{n-m} fixed.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mvflow/curvfun.hpp"
#include "mvflow/geometry.hpp"
#include "mvflow/monitor.hpp"

namespace mvflow::flow {

/// The evolution law: speed F^beta and preserved index m_index.
struct FlowLaw {
  curvfun::CurvatureSpec spec;
  int n = 2;
  double beta = 1.0;
  int m_index = -1;

  /// Throws ConfigError (beta >= 1, -1 <= m_index <= n-1, spec valid for n).
  void validate() const;
};

struct FlowState {
  double t = 0.0;
  long step = 0;
  geometry::Body body;
  geometry::CurvatureField curvature;
  double phi_bar = 0.0;
};

/// Builds a state with consistent caches. Throws ConvexityLoss.
FlowState make_state(const FlowLaw& law, geometry::Body body, double t = 0.0, long step = 0);

/// Per-node Phi = F^beta.
std::vector<double> phi_values(const FlowLaw& law, const geometry::CurvatureField& curv);

/// phi_bar_m = int E_{m+1} Phi dmu / int E_{m+1} dmu with E_0 = 1.
double global_term(const FlowLaw& law, const geometry::CurvatureField& curv, int m_index);
inline double global_term(const FlowLaw& law, const geometry::CurvatureField& curv) {
  return global_term(law, curv, law.m_index);
}

/// s = phi_bar - Phi per node.
std::vector<double> speed_field(const FlowLaw& law, const geometry::CurvatureField& curv,
                                double phi_bar);

/// cfl_safety * spacing^2 / max_nodes [beta F^{beta-1} sum f_i / (min_i R_i)^2].
double stable_dt(const FlowLaw& law, const FlowState& state, double cfl_safety);

/// Explicit midpoint step with phi_bar recomputed at both stages. Throws
/// ConvexityLoss.
FlowState step(const FlowLaw& law, const FlowState& state, double dt);

struct IdentityCheck {
  double lhs = 0.0;  // d/dt int E_m dmu
  double rhs = 0.0;  // (m+1) int (phi_bar - Phi) E_{m+1} dmu
  double residual = 0.0;
  bool absolute = false;  // both sides vanish; residual is |lhs - rhs|
  bool skipped = false;   // m = n: the integral is constant
};

/// Verifies d/dt int E_m dmu = (m+1) int (phi_bar - Phi) E_{m+1} dmu by a
/// central micro-step pair along the speed field (Richardson-extrapolated).
/// The speed uses the global term of phi_bar_index, default -1; with
/// phi_bar_m itself both sides vanish identically. Valid m: 0..n.
IdentityCheck integral_identity_check(const FlowLaw& law, const FlowState& state, int m,
                                      std::optional<int> phi_bar_index = std::nullopt);

// ---------------------------------------------------------------------------
// Configuration and run loop

enum class BackendKind { Axisym, Sphere2D };

struct BackendConfig {
  BackendKind kind = BackendKind::Axisym;
  int resolution = 256;  // theta intervals
  int n_phi = 0;         // lat-long only; 0 means 2 * resolution
};

enum class InitialKind { Sphere, Spheroid, Ellipsoid, Perturbed, Random };

struct InitialBody {
  InitialKind kind = InitialKind::Spheroid;
  double radius = 1.0;  // sphere / perturbed base radius
  double a = 1.0;       // semi-axes; Spheroid uses (a, ..., a, c)
  double b = 1.0;
  double c = 1.6;
  int degree = 2;       // harmonic degree for Perturbed, max degree for Random
  int order = 0;        // harmonic order (lat-long Perturbed only)
  double amplitude = 0.1;  // relative sup amplitude of the perturbation
};

/// Closed-form support function sampled on the backend grid. Throws
/// ConfigError if the result is not strictly convex.
geometry::Body make_initial_body(const InitialBody& init, const BackendConfig& backend, int n,
                                 std::uint64_t seed = 0);

struct FlowConfig {
  int n = 2;
  curvfun::CurvatureSpec spec;
  double beta = 1.0;
  int m_index = -1;
  BackendConfig backend;
  InitialBody initial;
  double cfl_safety = 0.25;
  double t_end = 100.0;
  long max_steps = 5'000'000;
  double f_tolerance = 1e-8;
  int cadence = 50;          // steps between monitor records
  int converge_window = 10;  // consecutive records below f_tolerance
  long snapshot_every = 0;   // steps between geometry snapshots, 0 = ends only
  std::uint64_t seed = 0;

  FlowLaw law() const { return {spec, n, beta, m_index}; }
  /// Throws ConfigError.
  void validate() const;
};

enum class Termination { Converged, ConvexityLoss, MaxSteps, TimeLimit };
std::string to_string(Termination t);

struct RunHooks {
  std::function<void(const analysis::MonitorRecord&)> on_record;
  std::function<void(const FlowState&)> on_snapshot;
};

struct RunResult {
  std::vector<analysis::MonitorRecord> trajectory;
  FlowState final_state;
  Termination termination = Termination::MaxSteps;
  std::optional<std::size_t> failed_node;  // set on convexity loss
  std::optional<double> failed_value;
};

/// Advances until convergence (f_max < f_tolerance for converge_window
/// consecutive records, or already at the first record), t_end, max_steps,
/// or convexity loss. Throws ConfigError before stepping on invalid input.
RunResult run(const FlowConfig& config, const RunHooks& hooks = {});

}  // namespace mvflow::flow
