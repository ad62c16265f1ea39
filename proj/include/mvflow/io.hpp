#pragma once

// File formats: geometry snapshot and trajectory CSV, JSON configuration,
// run summary, manifest and audit documents.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "mvflow/analysis.hpp"
#include "mvflow/flow.hpp"
#include "mvflow/monitor.hpp"

namespace mvflow::io {

using nlohmann::json;

/// Malformed or incomplete data file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Generic CSV

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  bool has(std::string_view name) const;
  /// Throws FormatError naming the column when absent.
  std::size_t index(std::string_view name) const;
  std::vector<double> column(std::string_view name) const;
};

/// Numeric CSV with one header row. Throws FormatError.
CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

// ---------------------------------------------------------------------------
// Geometry snapshots

struct Snapshot {
  int n = 0;
  bool has_phi = false;
  std::vector<double> theta, phi, h, weight;
  std::vector<std::vector<double>> radii;   // radii[i][node] = R_{i+1}
  std::vector<std::vector<double>> lambda;  // lambda[i][node], ascending in i

  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

Snapshot make_snapshot(const geometry::Body& body, const geometry::CurvatureField& curv);
void write_snapshot(const std::filesystem::path& path, const Snapshot& snap);
Snapshot read_snapshot(const std::filesystem::path& path);

/// Rebuilds the body from the node coordinates and support values.
geometry::Body body_from_snapshot(const Snapshot& snap);

// ---------------------------------------------------------------------------
// Trajectories

std::vector<std::string> trajectory_columns(int n);
void write_trajectory(const std::filesystem::path& path,
                      const std::vector<analysis::MonitorRecord>& trajectory);
/// Throws FormatError naming the first missing column.
std::vector<analysis::MonitorRecord> read_trajectory(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Configuration

/// Fills every field, including defaults, so the dump is canonical.
json config_to_json(const flow::FlowConfig& config);
/// Throws ConfigError on unknown keys, wrong types or invalid values.
flow::FlowConfig config_from_json(const json& doc);
/// Parses JSON text; syntax errors become ConfigError with line and column.
flow::FlowConfig parse_config(std::string_view text, std::string_view origin = "<config>");
flow::FlowConfig load_config(const std::filesystem::path& path);

/// A spec as {"family": ..., "params": {...}} or its name string.
curvfun::CurvatureSpec spec_from_json(const json& value);

/// FNV-1a 64 of the canonical compact dump, as 16 hex digits.
std::string config_hash(const flow::FlowConfig& config);

// ---------------------------------------------------------------------------
// Run documents

inline constexpr std::string_view kVersion = "0.1.0";

struct RunDigest {
  double max_drift = 0.0;  // max |V_{n-m}(t) / V_{n-m}(0) - 1|
  std::optional<analysis::DecayFit> f_fit;
  std::optional<analysis::DecayFit> pinch_fit;
  analysis::MonotonicityReport monotonicity;
  analysis::LimitSphereReport limit;
  analysis::RadiusRatioReport radius_ratio;
};

RunDigest digest(const flow::FlowConfig& config, const flow::RunResult& result);

json summary_json(const flow::FlowConfig& config, const flow::RunResult& result,
                  const RunDigest& digest);
json manifest_json(const flow::FlowConfig& config, flow::Termination termination,
                   double wall_clock_seconds);
/// Pass/fail per trajectory check with the measured constants.
json audit_json(const std::vector<analysis::MonitorRecord>& trajectory, int n, int m_index,
                curvfun::CurvatureClass speed_class, double f_tolerance);

void write_json(const std::filesystem::path& path, const json& doc);

}  // namespace mvflow::io
