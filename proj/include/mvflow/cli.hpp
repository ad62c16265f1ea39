#pragma once

// Subcommand implementations. The executable only parses flags and calls
// these, so every command is reachable from the library with the same
// results.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mvflow/io.hpp"

namespace mvflow::cli {

namespace fs = std::filesystem;

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kError = 1,          // configuration, input or I/O failure
  kConvexityLoss = 2,
  kNotConverged = 3,   // max_steps or t_end reached first
};

int exit_code(flow::Termination t);

struct RunOutcome {
  flow::RunResult result;
  io::RunDigest digest;
  double wall_clock_seconds = 0.0;
};

/// Runs the flow and writes trajectory.csv, snapshots/, summary.json,
/// audit.json, manifest.json and config.json under out.
RunOutcome run_to_directory(const flow::FlowConfig& config, const fs::path& out);

int cmd_run(const fs::path& config_path, const fs::path& out,
            std::optional<std::uint64_t> seed = std::nullopt);

/// Certification and sampler results for the whole registry in dimension n.
io::json verify_report(int n, int samples, std::uint64_t seed);
/// Writes verify_report.json; zero exactly when the sampler found no violation.
int cmd_verify(int n, int samples, std::uint64_t seed, const fs::path& out);

struct SweepAxes {
  std::vector<curvfun::CurvatureSpec> specs;
  std::vector<double> betas;
  std::vector<int> m_indices;
  std::vector<int> dimensions;
  std::vector<double> eccentricities;  // c / a of a spheroid with a = 1
};

struct SweepPlan {
  flow::FlowConfig base;
  SweepAxes axes;
};

/// {"base": <config>, "axes": {"spec": [...], "beta": [...], "m_index": [...],
/// "n": [...], "eccentricity": [...]}}; omitted axes take the base value.
SweepPlan parse_sweep(const io::json& doc);

struct SweepPoint {
  curvfun::CurvatureSpec spec;
  double beta = 1.0;
  int m_index = -1;
  int n = 2;
  double eccentricity = 1.6;
};

std::vector<SweepPoint> expand(const SweepPlan& plan);

struct SweepRow {
  SweepPoint point;
  std::string directory;
  std::string termination;  // flow termination or "error"
  long steps = 0;
  double t_final = 0.0;
  double drift = 0.0;
  std::optional<double> fitted_rate;
  double worst_monotonicity = 0.0;
  std::string error;
};

/// Runs every point on up to `workers` threads, each in out/run_XXXX.
std::vector<SweepRow> run_sweep(const SweepPlan& plan, const fs::path& out, int workers);
void write_sweep_csv(const fs::path& path, const std::vector<SweepRow>& rows);
int cmd_sweep(const fs::path& sweep_path, const fs::path& out, int workers);

/// Emits f_max.svg, min_q.svg, volume_drift.svg and pinch_ratio.svg. Throws
/// io::FormatError on an empty table or a missing column.
std::vector<fs::path> write_plots(const io::CsvTable& trajectory, const fs::path& out);
int cmd_plot(const fs::path& trajectory_csv, const fs::path& out);

/// Reads MVFLOW_LOG (error, info, debug) and routes log output to stderr.
void configure_logging();

}  // namespace mvflow::cli
