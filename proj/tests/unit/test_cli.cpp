#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mvflow/cli.hpp"

using namespace mvflow;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "mvflow_unit_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("exit code mapping") {
  CHECK(cli::exit_code(flow::Termination::Converged) == 0);
  CHECK(cli::exit_code(flow::Termination::ConvexityLoss) == 2);
  CHECK(cli::exit_code(flow::Termination::MaxSteps) == 3);
  CHECK(cli::exit_code(flow::Termination::TimeLimit) == 3);
}

TEST_CASE("run on a sphere converges and writes the layout") {
  const auto dir = scratch("sphere");
  const auto cfg = write_file(dir / "cfg.json", R"({
    "initial": {"kind": "sphere", "params": {"radius": 1}},
    "backend": {"kind": "axisym", "resolution": 64}, "cadence": 10})");
  const auto out = dir / "out";
  CHECK(cli::cmd_run(cfg, out) == 0);
  for (const char* f : {"trajectory.csv", "summary.json", "audit.json", "manifest.json", "config.json"}) {
    CHECK(fs::exists(out / f));
  }
  CHECK(fs::exists(out / "snapshots" / "step_000000000.csv"));
  const auto traj = io::read_csv(out / "trajectory.csv");
  for (double f : traj.column("f_max")) CHECK(f <= 1e-12);
  const auto manifest = io::json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["config_hash"] == io::config_hash(io::load_config(cfg)));
  // The written config reloads to the same canonical form.
  CHECK(io::config_hash(io::load_config(out / "config.json")) == manifest["config_hash"]);
}

TEST_CASE("run rejects bad configurations") {
  const auto dir = scratch("bad");
  CHECK(cli::cmd_run(write_file(dir / "beta.json", R"({"beta": 0.5})"), dir / "o1") == 1);
  CHECK(cli::cmd_run(write_file(dir / "syntax.json", "{\"n\": 2,,}"), dir / "o2") == 1);
  CHECK(cli::cmd_run(dir / "missing.json", dir / "o3") == 1);
  CHECK_FALSE(fs::exists(dir / "o1" / "trajectory.csv"));
}

TEST_CASE("run reports non-convergence") {
  const auto dir = scratch("short");
  const auto cfg = write_file(dir / "cfg.json", R"({
    "backend": {"kind": "axisym", "resolution": 32}, "max_steps": 20, "cadence": 10})");
  CHECK(cli::cmd_run(cfg, dir / "out") == 3);
  const auto summary = io::json::parse(slurp(dir / "out" / "summary.json"));
  CHECK(summary["termination"] == "max_steps");
}

TEST_CASE("seed override changes the hash only") {
  const auto dir = scratch("seed");
  const auto cfg = write_file(dir / "cfg.json", R"({
    "initial": {"kind": "sphere"}, "backend": {"kind": "axisym", "resolution": 32}})");
  REQUIRE(cli::cmd_run(cfg, dir / "a") == 0);
  REQUIRE(cli::cmd_run(cfg, dir / "b", 9) == 0);
  const auto a = io::json::parse(slurp(dir / "a" / "manifest.json"));
  const auto b = io::json::parse(slurp(dir / "b" / "manifest.json"));
  CHECK(a["config_hash"] != b["config_hash"]);
  CHECK(io::load_config(dir / "b" / "config.json").seed == 9);
}

TEST_CASE("library and command produce identical trajectories") {
  const auto dir = scratch("facade");
  const std::string text = R"({
    "spec": "NormOfA", "beta": 2, "backend": {"kind": "axisym", "resolution": 32},
    "max_steps": 400, "cadence": 20})";
  const auto cfg = write_file(dir / "cfg.json", text);
  cli::cmd_run(cfg, dir / "out");
  const auto lib = flow::run(io::parse_config(text));
  const auto from_disk = io::read_trajectory(dir / "out" / "trajectory.csv");
  REQUIRE(from_disk.size() == lib.trajectory.size());
  for (std::size_t i = 0; i < lib.trajectory.size(); ++i) {
    CHECK(from_disk[i].t == lib.trajectory[i].t);
    CHECK(from_disk[i].f_max == lib.trajectory[i].f_max);
    CHECK(from_disk[i].volumes == lib.trajectory[i].volumes);
  }
}

TEST_CASE("verify is deterministic and clean") {
  const auto dir = scratch("verify");
  CHECK(cli::cmd_verify(2, 5000, 3, dir / "a") == 0);
  CHECK(cli::cmd_verify(2, 5000, 3, dir / "b") == 0);
  CHECK(slurp(dir / "a" / "verify_report.json") == slurp(dir / "b" / "verify_report.json"));
  CHECK(cli::cmd_verify(1, 10, 0, dir / "c") == 1);

  const auto report = cli::verify_report(5, 2000, 1);
  CHECK(report["total_violations"] == 0);
  bool found = false;
  for (const auto& c : report["certification"]) {
    CHECK(c["class_certified"] == true);
    if (c["spec"] == "GammaK(3)") {
      found = true;
      CHECK(c["convex"] == true);
    }
  }
  CHECK(found);
}

TEST_CASE("sweep expands the cartesian product") {
  const auto plan = cli::parse_sweep(io::json::parse(R"({
    "base": {"backend": {"kind": "axisym", "resolution": 32}, "cadence": 20},
    "axes": {"spec": ["MeanH", "NormOfA"], "beta": [1, 2], "m_index": [-1, 0]}})"));
  const auto points = cli::expand(plan);
  CHECK(points.size() == 8);
  CHECK(points.front().n == 2);
  CHECK(points.front().eccentricity == 1.6);

  CHECK_THROWS_AS(cli::parse_sweep(io::json::parse(R"({"axes": {"gamma": [1]}})")), ConfigError);
  CHECK_THROWS_AS(cli::parse_sweep(io::json::parse(R"({"basis": {}})")), ConfigError);
}

TEST_CASE("sweep records failures per row") {
  const auto dir = scratch("sweep");
  const auto sweep = write_file(dir / "sweep.json", R"({
    "base": {"backend": {"kind": "axisym", "resolution": 32}, "cadence": 20},
    "axes": {"spec": ["MeanH", "NormOfA"], "beta": [1, 2], "m_index": [-1, 5]}})");
  CHECK(cli::cmd_sweep(sweep, dir / "out", 3) == 0);
  const auto csv = slurp(dir / "out" / "sweep.csv");
  std::size_t lines = 0, errors = 0, converged = 0;
  for (std::size_t p = csv.find('\n'); p != std::string::npos; p = csv.find('\n', p + 1)) ++lines;
  for (std::size_t p = csv.find(",error,"); p != std::string::npos; p = csv.find(",error,", p + 1)) ++errors;
  for (std::size_t p = csv.find(",converged,"); p != std::string::npos; p = csv.find(",converged,", p + 1)) {
    ++converged;
  }
  CHECK(lines == 9);
  CHECK(errors == 4);
  CHECK(converged == 4);
  CHECK(fs::exists(dir / "out" / "run_0000" / "summary.json"));
  CHECK(cli::cmd_sweep(dir / "nope.json", dir / "out2", 1) == 1);
}

TEST_CASE("plot outputs") {
  const auto dir = scratch("plot");
  const auto header = "t,f_max,min_q1,min_q2,v_preserved,pinch_ratio\n";
  const auto one = write_file(dir / "one.csv", std::string(header) + "0,1e-3,0.2,0.2,4.1,1.5\n");
  CHECK(cli::cmd_plot(one, dir / "o1") == 0);
  for (const char* f : {"f_max.svg", "min_q.svg", "volume_drift.svg", "pinch_ratio.svg"}) {
    CHECK(fs::exists(dir / "o1" / f));
    CHECK(slurp(dir / "o1" / f).find("<svg") != std::string::npos);
  }
  CHECK(cli::cmd_plot(write_file(dir / "empty.csv", header), dir / "o2") == 1);
  CHECK(cli::cmd_plot(write_file(dir / "nof.csv", "t,min_q1\n0,1\n"), dir / "o3") == 1);
  try {
    cli::write_plots(io::read_csv(dir / "nof.csv"), dir / "o4");
    FAIL("expected FormatError");
  } catch (const io::FormatError& e) {
    CHECK(std::string(e.what()).find("'") != std::string::npos);
  }
}
