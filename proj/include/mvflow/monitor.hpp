#pragma once

#include <vector>

namespace mvflow::analysis {

/// One time slice of the tracked scalars.
struct MonitorRecord {
  double t = 0.0;
  long step = 0;
  double dt = 0.0;
  double v_preserved = 0.0;     // V_{n-m} for the law's m_index
  std::vector<double> volumes;  // V_0 .. V_{n+1} (V_{n+1} = enclosed volume)
  double min_q1 = 0.0;          // min K / H^n
  double min_q2 = 0.0;          // min K / F^n
  double f_max = 0.0;           // max 1/n^n - K/H^n
  double pinch_ratio = 1.0;     // max lambda_n / lambda_1
  double speed_min = 0.0;
  double speed_max = 0.0;
  double phi_max = 0.0;
  double phi_bar = 0.0;
  double rho_minus = 0.0;
  double rho_plus = 0.0;
  double z_max = 0.0;           // max Phi / (h_c - rho_minus/4)
  double f_min = 0.0;           // min F
  double f_min_integral = 0.0;  // running int_0^t min F dt (trapezoid over records)
};

}  // namespace mvflow::analysis
