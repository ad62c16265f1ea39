#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mvflow/io.hpp"

using namespace mvflow;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "mvflow_unit_io";
  fs::create_directories(dir);
  return dir / name;
}

std::string config_error(const std::string& text) {
  try {
    io::parse_config(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("snapshot round trip is lossless") {
  flow::InitialBody init;
  init.kind = flow::InitialKind::Random;
  init.degree = 3;
  init.amplitude = 0.05;
  for (auto backend : {flow::BackendConfig{flow::BackendKind::Axisym, 64},
                       flow::BackendConfig{flow::BackendKind::Sphere2D, 12, 24}}) {
    const auto body = flow::make_initial_body(init, backend, 2, 3);
    const auto snap = io::make_snapshot(body, geometry::curvatures(body));
    const auto path = scratch("snap.csv");
    io::write_snapshot(path, snap);
    const auto back = io::read_snapshot(path);
    CHECK(back == snap);
    const auto rebuilt = io::body_from_snapshot(back);
    CHECK(std::ranges::equal(geometry::support(rebuilt), geometry::support(body)));
    CHECK(geometry::node_count(rebuilt) == geometry::node_count(body));
  }
}

TEST_CASE("snapshot columns") {
  const auto body = flow::make_initial_body({}, {flow::BackendKind::Axisym, 32}, 3);
  const auto path = scratch("snap3.csv");
  io::write_snapshot(path, io::make_snapshot(body, geometry::curvatures(body)));
  const auto t = io::read_csv(path);
  CHECK(t.header == std::vector<std::string>{"theta", "h", "R_1", "R_2", "R_3", "lambda_1",
                                             "lambda_2", "lambda_3", "weight"});
  CHECK(t.rows.size() == 33);
}

TEST_CASE("trajectory round trip") {
  flow::FlowConfig c;
  c.backend.resolution = 32;
  c.max_steps = 60;
  c.cadence = 20;
  const auto r = flow::run(c);
  const auto path = scratch("traj.csv");
  io::write_trajectory(path, r.trajectory);
  const auto back = io::read_trajectory(path);
  REQUIRE(back.size() == r.trajectory.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].t == r.trajectory[i].t);
    CHECK(back[i].step == r.trajectory[i].step);
    CHECK(back[i].volumes == r.trajectory[i].volumes);
    CHECK(back[i].z_max == r.trajectory[i].z_max);
    CHECK(back[i].f_min_integral == r.trajectory[i].f_min_integral);
  }
}

TEST_CASE("missing trajectory column is named") {
  const auto path = scratch("bad_traj.csv");
  {
    std::ofstream out(path);
    out << "t,step,dt,v_preserved,V_0,V_1,V_2,V_3,min_q1\n0,0,0,1,1,1,1,1,0.25\n";
  }
  try {
    io::read_trajectory(path);
    FAIL("expected FormatError");
  } catch (const io::FormatError& e) {
    CHECK(std::string(e.what()).find("min_q2") != std::string::npos);
  }
}

TEST_CASE("csv diagnostics") {
  const auto path = scratch("ragged.csv");
  {
    std::ofstream out(path);
    out << "a,b\n1,2\n3\n";
  }
  CHECK_THROWS_AS(io::read_csv(path), io::FormatError);
  {
    std::ofstream out(path);
    out << "a,b\n1,x\n";
  }
  CHECK_THROWS_AS(io::read_csv(path), io::FormatError);
  CHECK_THROWS_AS(io::read_csv(scratch("does_not_exist.csv")), io::FormatError);
}

TEST_CASE("config parsing") {
  const auto c = io::parse_config(R"({
    "n": 3,
    "spec": {"family": "GammaK", "params": {"k": 3}},
    "beta": 1.5,
    "m_index": 1,
    "backend": {"kind": "axisym", "resolution": 128},
    "initial": {"kind": "spheroid", "params": {"a": 1, "c": 2}},
    "cfl_safety": 0.2, "t_end": 50, "max_steps": 1000, "f_tolerance": 1e-9,
    "cadence": 25, "seed": 4
  })");
  CHECK(c.n == 3);
  CHECK(c.spec == curvfun::CurvatureSpec::gamma_k(3));
  CHECK(c.beta == 1.5);
  CHECK(c.m_index == 1);
  CHECK(c.backend.resolution == 128);
  CHECK(c.initial.c == 2.0);
  CHECK(c.initial.b == 1.0);
  CHECK(c.cfl_safety == 0.2);
  CHECK(c.max_steps == 1000);
  CHECK(c.cadence == 25);
  CHECK(c.seed == 4);
  CHECK(io::parse_config(R"j({"spec": "QuotientEml(2,0)"})j").spec == curvfun::CurvatureSpec::quotient(2, 0));
}

TEST_CASE("config errors") {
  const auto syntax = config_error("{\n  \"n\": 2,\n  \"beta\": ,\n}");
  CHECK(syntax.find("cfg.json:3:11") != std::string::npos);
  CHECK(config_error(R"({"beta": 0.5})").find("beta >= 1") != std::string::npos);
  CHECK(config_error(R"({"betta": 1})").find("unknown key") != std::string::npos);
  CHECK(config_error(R"({"n": "two"})").find("config.n") != std::string::npos);
  CHECK(config_error(R"({"spec": {"family": "Nope"}})").find("unknown family") != std::string::npos);
  CHECK(config_error(R"({"initial": {"kind": "sphere", "params": {"c": 2}}})").find("not a parameter") !=
        std::string::npos);
  CHECK(config_error(R"({"backend": {"kind": "mesh"}})").find("backend.kind") != std::string::npos);
  CHECK(config_error(R"([1, 2])").find("expected an object") != std::string::npos);
}

TEST_CASE("config hash canonicalisation") {
  const auto a = io::parse_config(R"({"n": 2, "beta": 1, "cadence": 50})");
  const auto b = io::parse_config("{ \"cadence\" : 50,\n\n \"beta\": 1.0,   \"n\": 2 }");
  const auto d = io::parse_config("{}");
  CHECK(io::config_hash(a) == io::config_hash(b));
  CHECK(io::config_hash(a) == io::config_hash(d));
  CHECK(io::config_hash(a).size() == 16);

  auto e = a;
  e.beta = 1.25;
  CHECK(io::config_hash(e) != io::config_hash(a));
  e = a;
  e.initial.c = 1.7;
  CHECK(io::config_hash(e) != io::config_hash(a));
  e = a;
  e.seed = 1;
  CHECK(io::config_hash(e) != io::config_hash(a));
  e = a;
  e.backend.resolution = 128;
  CHECK(io::config_hash(e) != io::config_hash(a));
  // Parameters irrelevant to the chosen kind do not enter the hash.
  e = a;
  e.initial.radius = 3.0;
  CHECK(io::config_hash(e) == io::config_hash(a));

  const auto round = io::config_from_json(io::config_to_json(e));
  CHECK(io::config_to_json(round) == io::config_to_json(e));
}

TEST_CASE("run documents") {
  flow::FlowConfig c;
  c.backend.resolution = 32;
  c.cadence = 10;
  const auto r = flow::run(c);
  const auto d = io::digest(c, r);
  const auto s = io::summary_json(c, r, d);
  CHECK(s["termination"] == "converged");
  CHECK(s["fitted_rate"].get<double>() < 0.0);
  CHECK(s["conservation_drift"].get<double>() < 1e-3);
  const auto m = io::manifest_json(c, r.termination, 1.5);
  CHECK(m["config_hash"] == io::config_hash(c));
  CHECK(m["termination"] == "converged");
  CHECK(m["layout"]["trajectory"] == "trajectory.csv");
  const auto a = io::audit_json(r.trajectory, 2, -1, curvfun::CurvatureClass::Convex, c.f_tolerance);
  CHECK(a["pass"] == true);
  CHECK(a["checks"]["radius_ratio"]["pass"] == true);
  CHECK_THROWS_AS(io::audit_json({}, 2, -1, curvfun::CurvatureClass::Convex, 1e-8), io::FormatError);
}
