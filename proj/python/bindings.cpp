#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mvflow/analysis.hpp"
#include "mvflow/cli.hpp"
#include "mvflow/curvfun.hpp"
#include "mvflow/flow.hpp"
#include "mvflow/geometry.hpp"
#include "mvflow/io.hpp"

namespace py = pybind11;
using namespace mvflow;

namespace {

py::array_t<double> array(const std::vector<double>& v) {
  return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

py::array_t<double> matrix(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  py::array_t<double> a({rows, cols});
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

flow::FlowConfig parse(const std::string& config_json) {
  return io::parse_config(config_json, "<python>");
}

py::dict trajectory_columns(const std::vector<analysis::MonitorRecord>& traj) {
  py::dict out;
  if (traj.empty()) return out;
  const int n = static_cast<int>(traj.front().volumes.size()) - 2;
  const auto names = io::trajectory_columns(n);
  std::vector<std::vector<double>> cols(names.size());
  for (const auto& r : traj) {
    std::size_t c = 0;
    cols[c++].push_back(r.t);
    cols[c++].push_back(static_cast<double>(r.step));
    cols[c++].push_back(r.dt);
    cols[c++].push_back(r.v_preserved);
    for (double v : r.volumes) cols[c++].push_back(v);
    for (double v : {r.min_q1, r.min_q2, r.f_max, r.pinch_ratio, r.speed_min, r.speed_max,
                     r.phi_max, r.phi_bar, r.rho_minus, r.rho_plus, r.z_max, r.f_min,
                     r.f_min_integral}) {
      cols[c++].push_back(v);
    }
  }
  for (std::size_t i = 0; i < names.size(); ++i) out[py::str(names[i])] = array(cols[i]);
  return out;
}

py::dict geometry_of(const geometry::Body& body) {
  const auto curv = geometry::curvatures(body);
  const int n = curv.n;
  const auto bounds = geometry::radii_bounds(body, curv);
  py::dict out;
  const auto h = geometry::support(body);
  out["h"] = array({h.begin(), h.end()});
  out["lambda"] = matrix(curv.lambda, curv.nodes(), static_cast<std::size_t>(n));
  out["radii"] = matrix(curv.radii, curv.nodes(), static_cast<std::size_t>(n));
  out["weight"] = array(curv.weight);
  std::vector<double> volumes;
  for (int k = 0; k <= n + 1; ++k) volumes.push_back(geometry::mixed_volume(body, curv, n - k));
  out["mixed_volumes"] = array(volumes);
  out["area"] = py::float_(geometry::surface_integral(curv, std::vector<double>(curv.nodes(), 1.0)));
  out["volume"] = py::float_(volumes.back());
  out["rho_minus"] = bounds.rho_minus;
  out["rho_plus"] = bounds.rho_plus;
  out["steiner"] = array(bounds.steiner);
  out["pinch_ratio"] = bounds.pinch_ratio;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Mixed-volume preserving curvature flows (C++ core)";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<io::FormatError>(m, "FormatError", PyExc_ValueError);

  m.def("registry", [](int n) {
    std::vector<std::string> names;
    for (const auto& s : curvfun::registry(n)) names.push_back(s.name());
    return names;
  }, py::arg("n"), "Names of the registry members valid in dimension n.");

  m.def("declared_class", [](const std::string& spec) {
    return curvfun::CurvatureSpec::parse(spec).declared_class() == curvfun::CurvatureClass::Convex
               ? "convex" : "concave";
  }, py::arg("spec"));

  m.def("evaluate", [](const std::string& spec, std::vector<double> lambda) {
    const auto b = curvfun::eval(curvfun::CurvatureSpec::parse(spec), curvfun::LambdaVector(lambda));
    const auto n = static_cast<std::size_t>(b.size());
    return py::make_tuple(b.value, array(b.gradient), matrix(b.hessian, n, n));
  }, py::arg("spec"), py::arg("lambda_"),
     "Normalised value, gradient and Hessian at lambda (returned in ascending order).");

  m.def("elementary_symmetric", [](int k, std::vector<double> lambda) {
    return curvfun::elementary_symmetric(k, curvfun::LambdaVector(std::move(lambda)));
  }, py::arg("k"), py::arg("lambda_"));

  m.def("initial_geometry", [](const std::string& config_json) {
    const auto c = parse(config_json);
    return geometry_of(flow::make_initial_body(c.initial, c.backend, c.n, c.seed));
  }, py::arg("config_json"), "Discrete geometry of the configured initial body.");

  m.def("run", [](const std::string& config_json) {
    const auto c = parse(config_json);
    flow::RunResult result = [&] {
      py::gil_scoped_release release;
      return flow::run(c);
    }();
    const auto dig = io::digest(c, result);
    py::dict out;
    out["summary"] = io::summary_json(c, result, dig).dump();
    out["trajectory"] = trajectory_columns(result.trajectory);
    out["final"] = geometry_of(result.final_state.body);
    return out;
  }, py::arg("config_json"), "Evolve a configuration in memory.");

  m.def("run_to_directory", [](const std::string& config_json, const std::string& out) {
    const auto c = parse(config_json);
    py::gil_scoped_release release;
    return cli::exit_code(cli::run_to_directory(c, out).result.termination);
  }, py::arg("config_json"), py::arg("out"), "Same outputs and exit code as the run subcommand.");

  m.def("verify_report", [](int n, int samples, std::uint64_t seed) {
    py::gil_scoped_release release;
    return cli::verify_report(n, samples, seed).dump();
  }, py::arg("n"), py::arg("samples"), py::arg("seed"));

  m.def("canonical_config", [](const std::string& config_json) {
    const auto c = parse(config_json);
    return py::make_tuple(io::config_to_json(c).dump(), io::config_hash(c));
  }, py::arg("config_json"));

  m.def("fit_decay", [](std::vector<double> t, std::vector<double> q, double tolerance) -> py::object {
    const auto fit = analysis::fit_decay(t, q, tolerance);
    if (!fit) return py::none();
    return py::make_tuple(fit->rate, fit->r_squared, fit->t_begin, fit->t_end, fit->count);
  }, py::arg("t"), py::arg("q"), py::arg("tolerance"));

  m.def("plot", [](const std::string& trajectory_csv, const std::string& out) {
    std::vector<std::string> paths;
    for (const auto& p : cli::write_plots(io::read_csv(trajectory_csv), out)) paths.push_back(p.string());
    return paths;
  }, py::arg("trajectory_csv"), py::arg("out"));
}
