#pragma once

// Monitors and post-processing: pinching quantities, umbilicity deficit,
// speed and radius checks, exponential-rate fitting.

#include <optional>
#include <span>
#include <vector>

#include "mvflow/curvfun.hpp"
#include "mvflow/flow.hpp"
#include "mvflow/monitor.hpp"

namespace mvflow::analysis {

/// All monitor fields from the state's per-node data. The Tso quantity is
/// taken about the Steiner point with epsilon = rho_minus / 4.
MonitorRecord record(const flow::FlowLaw& law, const flow::FlowState& state);

struct MonotonicityReport {
  bool uses_q2 = false;  // convex speeds watch K/F^n, concave ones K/H^n
  double worst_relative_decrease = 0.0;  // min over consecutive records of dQ / Q
  std::size_t worst_index = 0;           // record index where it occurs
  bool passes = true;                    // worst >= -tolerance
  double tolerance = 1e-6;
  double sup_phi_max = 0.0;
  bool phi_bounded = true;
  bool pinch_nonincreasing_tail = true;  // over the second half of the records
};

MonotonicityReport monotonicity_audit(std::span<const MonitorRecord> trajectory,
                                      curvfun::CurvatureClass speed_class,
                                      double tolerance = 1e-6);

enum class DecayQuantity { FMax, PinchExcess };

struct DecayFit {
  double rate = 0.0;  // slope of log(quantity) against t
  double r_squared = 0.0;
  double t_begin = 0.0;
  double t_end = 0.0;
  std::size_t count = 0;
};

/// Least-squares line of log q against t over the last contiguous window with
/// q in [10 * tolerance, 1e-2 * q(0)]. nullopt with fewer than 20 points or
/// no variation.
std::optional<DecayFit> fit_decay(std::span<const double> t, std::span<const double> q,
                                  double tolerance);
std::optional<DecayFit> fit_decay(std::span<const MonitorRecord> trajectory,
                                  DecayQuantity quantity, double tolerance);

struct LimitSphereReport {
  double r_star = 0.0;  // (V_{n-m}(0) / omega_{n+1})^{1/(n-m)}
  double max_relative_deviation = 0.0;  // max |h_c - R*| / R*
  double pinch_excess = 0.0;            // final pinch_ratio - 1
};

LimitSphereReport limit_sphere_check(const flow::FlowState& final_state,
                                     const flow::FlowLaw& law, double v_initial);

/// R* for a preserved V_{n-m} value.
double limit_radius(int n, int m_index, double v_preserved);

struct RadiusRatioReport {
  double worst_margin = 0.0;  // max over records of (rho+/rho-) / bound
  bool holds = true;
};

/// rho+/rho- <= ((n+2)/sqrt 2) * pinch_ratio at every record.
RadiusRatioReport radius_ratio_check(std::span<const MonitorRecord> trajectory, int n);

struct DeltaCheck {
  std::size_t nodes_checked = 0;
  double min_ratio = 0.0;
  bool holds = true;
};

/// At nodes with lambda_i >= eps H and a nonzero deficit, checks
/// (n|A|^2 - H^2)/H^2 >= delta (1/n^n - K/H^n) with a relative slack.
DeltaCheck roundness_delta_check(const geometry::CurvatureField& curv, double epsilon, double delta,
                             double slack = 1e-6);

}  // namespace mvflow::analysis
