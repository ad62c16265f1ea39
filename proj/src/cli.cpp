#include "mvflow/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "mvflow/errors.hpp"

namespace mvflow::cli {

int exit_code(flow::Termination t) {
  switch (t) {
    case flow::Termination::Converged: return kOk;
    case flow::Termination::ConvexityLoss: return kConvexityLoss;
    case flow::Termination::MaxSteps:
    case flow::Termination::TimeLimit: return kNotConverged;
  }
  return kError;
}

void configure_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::stderr_color_mt("mvflow");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
  });
  const char* env = std::getenv("MVFLOW_LOG");
  const std::string level = env ? env : "error";
  if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else if (level == "info") {
    spdlog::set_level(spdlog::level::info);
  } else {
    spdlog::set_level(spdlog::level::err);
    if (level != "error") spdlog::error("MVFLOW_LOG='{}' not recognised; using error", level);
  }
}

// ---------------------------------------------------------------------------
// run

RunOutcome run_to_directory(const flow::FlowConfig& config, const fs::path& out) {
  config.validate();
  fs::create_directories(out / "snapshots");
  io::write_json(out / "config.json", io::config_to_json(config));

  flow::RunHooks hooks;
  hooks.on_record = [](const analysis::MonitorRecord& r) {
    spdlog::debug("t={:.6g} step={} f_max={:.3e} pinch={:.9f} V={:.15g}", r.t, r.step, r.f_max,
                  r.pinch_ratio, r.v_preserved);
  };
  hooks.on_snapshot = [&](const flow::FlowState& s) {
    char name[40];
    std::snprintf(name, sizeof name, "step_%09ld.csv", s.step);
    io::write_snapshot(out / "snapshots" / name, io::make_snapshot(s.body, s.curvature));
  };

  const auto start = std::chrono::steady_clock::now();
  auto result = flow::run(config, hooks);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  auto dig = io::digest(config, result);
  io::write_trajectory(out / "trajectory.csv", result.trajectory);
  io::write_json(out / "summary.json", io::summary_json(config, result, dig));
  io::write_json(out / "audit.json",
                 io::audit_json(result.trajectory, config.n, config.m_index,
                                config.spec.declared_class(), config.f_tolerance));
  io::write_json(out / "manifest.json", io::manifest_json(config, result.termination, wall));
  spdlog::info("{}: {} after {} steps (t = {:.6g}, {:.2f} s)", config.spec.name(),
               flow::to_string(result.termination), result.final_state.step,
               result.final_state.t, wall);
  if (result.failed_node) {
    spdlog::error("convexity lost at node {} (radius {:.3e})", *result.failed_node,
                  *result.failed_value);
  }
  return RunOutcome{std::move(result), std::move(dig), wall};
}

int cmd_run(const fs::path& config_path, const fs::path& out, std::optional<std::uint64_t> seed) {
  flow::FlowConfig config;
  try {
    config = io::load_config(config_path);
    if (seed) config.seed = *seed;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kError;
  }
  try {
    return exit_code(run_to_directory(config, out).result.termination);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kError;
  }
}

// ---------------------------------------------------------------------------
// verify

namespace {

io::json number_or_null(double v) { return std::isfinite(v) ? io::json(v) : io::json(nullptr); }

const char* class_name(curvfun::CurvatureClass c) {
  return c == curvfun::CurvatureClass::Convex ? "convex" : "concave";
}

}  // namespace

io::json verify_report(int n, int samples, std::uint64_t seed) {
  io::json certs = io::json::array();
  for (const auto& spec : curvfun::registry(n)) {
    const auto c = curvfun::certify_conditions(spec, n, samples, seed);
    certs.push_back({
        {"spec", c.spec},
        {"declared", class_name(c.declared)},
        {"samples", c.samples},
        {"monotone", c.monotone},
        {"min_gradient", c.min_gradient},
        {"max_euler_residual", c.max_euler_residual},
        {"min_eigen_rel", c.min_eigen_rel},
        {"max_eigen_rel", c.max_eigen_rel},
        {"convex", c.convex},
        {"concave", c.concave},
        {"inverse_concave_negated", c.inverse_concave_negated},
        {"inverse_concave_standard", c.inverse_concave_standard},
        {"class_certified", c.class_certified},
        {"worst_sample", c.worst_sample ? io::json(*c.worst_sample) : io::json(nullptr)},
    });
  }
  const auto sampled = curvfun::sample_inequalities(n, samples, seed);
  io::json tallies = io::json::array();
  for (const auto& t : sampled.specs) {
    tallies.push_back({
        {"spec", t.spec},
        {"declared", class_name(t.declared)},
        {"checked", t.checked},
        {"value_violations", t.value_violations},
        {"gradient_violations", t.gradient_violations},
        {"worst_value_margin", t.worst_value_margin},
        {"worst_gradient_margin", t.worst_gradient_margin},
    });
  }
  io::json deltas = io::json::array();
  for (const auto& d : sampled.deltas) {
    deltas.push_back({
        {"epsilon", d.epsilon},
        {"delta", number_or_null(d.delta)},
        {"vacuous", d.vacuous},
        {"nondegenerate", d.nondegenerate},
        {"degenerate", d.degenerate},
        {"argmin", d.argmin},
    });
  }
  return {
      {"n", n},
      {"samples", samples},
      {"seed", seed},
      {"certification", certs},
      {"inequalities", tallies},
      {"maclaurin", {{"checked", sampled.maclaurin_checked},
                     {"violations", sampled.maclaurin_violations}}},
      {"delta", deltas},
      {"total_violations", sampled.total_violations()},
  };
}

int cmd_verify(int n, int samples, std::uint64_t seed, const fs::path& out) {
  try {
    if (n < 2 || samples < 1) throw ConfigError("verify needs n >= 2 and samples >= 1");
    const auto report = verify_report(n, samples, seed);
    fs::create_directories(out);
    io::write_json(out / "verify_report.json", report);
    const long violations = report["total_violations"].get<long>();
    spdlog::info("verify n={} samples={}: {} violations", n, samples, violations);
    return violations == 0 ? kOk : kError;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kError;
  }
}

// ---------------------------------------------------------------------------
// sweep

SweepPlan parse_sweep(const io::json& doc) {
  if (!doc.is_object()) throw ConfigError("sweep: expected an object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "base" && key != "axes") throw ConfigError("sweep." + key + ": unknown key");
  }
  SweepPlan plan;
  plan.base = io::config_from_json(doc.value("base", io::json::object()));
  const auto axes = doc.value("axes", io::json::object());
  if (!axes.is_object()) throw ConfigError("sweep.axes: expected an object");
  auto list = [&](const char* key) -> std::vector<io::json> {
    if (!axes.contains(key)) return {};
    const auto& v = axes.at(key);
    if (!v.is_array() || v.empty()) {
      throw ConfigError(std::string("sweep.axes.") + key + ": expected a non-empty array");
    }
    return {v.begin(), v.end()};
  };
  for (const auto& [key, _] : axes.items()) {
    if (key != "spec" && key != "beta" && key != "m_index" && key != "n" && key != "eccentricity") {
      throw ConfigError("sweep.axes." + key + ": unknown axis");
    }
  }
  try {
    for (const auto& v : list("spec")) {
      plan.axes.specs.push_back(io::spec_from_json(v));
    }
    for (const auto& v : list("beta")) plan.axes.betas.push_back(v.get<double>());
    for (const auto& v : list("m_index")) plan.axes.m_indices.push_back(v.get<int>());
    for (const auto& v : list("n")) plan.axes.dimensions.push_back(v.get<int>());
    for (const auto& v : list("eccentricity")) plan.axes.eccentricities.push_back(v.get<double>());
  } catch (const io::json::exception& e) {
    throw ConfigError(std::string("sweep.axes: ") + e.what());
  }
  return plan;
}

std::vector<SweepPoint> expand(const SweepPlan& plan) {
  const auto& b = plan.base;
  auto or_base = [](auto values, auto fallback) {
    if (values.empty()) values.push_back(fallback);
    return values;
  };
  const auto specs = or_base(plan.axes.specs, b.spec);
  const auto betas = or_base(plan.axes.betas, b.beta);
  const auto ms = or_base(plan.axes.m_indices, b.m_index);
  const auto ns = or_base(plan.axes.dimensions, b.n);
  const auto eccs = or_base(plan.axes.eccentricities, b.initial.c / b.initial.a);
  std::vector<SweepPoint> out;
  for (const auto& s : specs)
    for (double beta : betas)
      for (int m : ms)
        for (int n : ns)
          for (double e : eccs) out.push_back({s, beta, m, n, e});
  return out;
}

namespace {

flow::FlowConfig config_for(const SweepPlan& plan, const SweepPoint& p) {
  auto c = plan.base;
  c.spec = p.spec;
  c.beta = p.beta;
  c.m_index = p.m_index;
  c.n = p.n;
  if (!plan.axes.eccentricities.empty()) {
    c.initial.kind = flow::InitialKind::Spheroid;
    c.initial.a = c.initial.b = 1.0;
    c.initial.c = p.eccentricity;
  }
  return c;
}

std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch == '\n' ? ' ' : ch;
  }
  return q + "\"";
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::vector<SweepRow> run_sweep(const SweepPlan& plan, const fs::path& out, int workers) {
  const auto points = expand(plan);
  std::vector<SweepRow> rows(points.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      SweepRow& row = rows[i];
      row.point = points[i];
      char dir[32];
      std::snprintf(dir, sizeof dir, "run_%04zu", i);
      row.directory = dir;
      try {
        const auto outcome = run_to_directory(config_for(plan, points[i]), out / dir);
        row.termination = flow::to_string(outcome.result.termination);
        row.steps = outcome.result.final_state.step;
        row.t_final = outcome.result.final_state.t;
        row.drift = outcome.digest.max_drift;
        if (outcome.digest.f_fit) row.fitted_rate = outcome.digest.f_fit->rate;
        row.worst_monotonicity = outcome.digest.monotonicity.worst_relative_decrease;
      } catch (const std::exception& e) {
        row.termination = "error";
        row.error = e.what();
        spdlog::warn("{}: {}", dir, e.what());
      }
    }
  };
  const int count = std::clamp<int>(workers, 1, std::max<int>(1, static_cast<int>(points.size())));
  std::vector<std::jthread> pool;
  for (int w = 1; w < count; ++w) pool.emplace_back(work);
  work();
  pool.clear();
  return rows;
}

void write_sweep_csv(const fs::path& path, const std::vector<SweepRow>& rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw io::FormatError("cannot write " + path.string());
  out << "run,spec,beta,m_index,n,eccentricity,termination,steps,t_final,drift,fitted_rate,"
         "worst_monotonicity,error\n";
  for (const auto& r : rows) {
    out << r.directory << ',' << csv_text(r.point.spec.name()) << ',' << num(r.point.beta) << ','
        << r.point.m_index << ',' << r.point.n << ',' << num(r.point.eccentricity) << ','
        << r.termination << ',' << r.steps << ',' << num(r.t_final) << ',' << num(r.drift) << ','
        << (r.fitted_rate ? num(*r.fitted_rate) : "") << ',' << num(r.worst_monotonicity) << ','
        << csv_text(r.error) << '\n';
  }
}

int cmd_sweep(const fs::path& sweep_path, const fs::path& out, int workers) {
  SweepPlan plan;
  try {
    std::ifstream in(sweep_path);
    if (!in) throw ConfigError("cannot read sweep config " + sweep_path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const auto text = ss.str();
    io::json doc;
    try {
      doc = io::json::parse(text);
    } catch (const io::json::parse_error&) {
      // Reuse the config parser's line/column diagnostics.
      io::parse_config(text, sweep_path.string());
    }
    plan = parse_sweep(doc);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kError;
  }
  try {
    const auto rows = run_sweep(plan, out, workers);
    write_sweep_csv(out / "sweep.csv", rows);
    spdlog::info("sweep: {} runs written to {}", rows.size(), (out / "sweep.csv").string());
    return kOk;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kError;
  }
}

// ---------------------------------------------------------------------------
// plot

namespace {

struct Series {
  std::string label;
  std::vector<double> x, y;
  const char* color;
};

std::vector<double> ticks(double lo, double hi, int target = 6) {
  if (!(hi > lo)) return {lo};
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  }
  std::vector<double> out;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) {
    out.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
  }
  return out;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// y values are plotted as given; log_y means they are already log10 values.
std::string svg_chart(const std::string& title, const std::string& ylabel,
                      const std::vector<Series>& series, bool log_y) {
  constexpr double W = 720, H = 440, L = 80, R = 20, T = 40, B = 56;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 <= x0) x0 -= 0.5, x1 += 0.5;
  if (y1 <= y0) {
    const double pad = y0 == 0.0 ? 1.0 : 0.05 * std::abs(y0);
    y0 -= pad;
    y1 += pad;
  } else {
    const double pad = 0.04 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
  }
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream s;
  s.precision(6);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << escape_xml(title) << "</text>\n";
  for (double v : ticks(x0, x1)) {
    s << "<line x1=\"" << px(v) << "\" y1=\"" << T << "\" x2=\"" << px(v) << "\" y2=\""
      << H - B << "\" stroke=\"#e5e5e5\"/>\n"
      << "<text x=\"" << px(v) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">"
      << fmt_tick(v) << "</text>\n";
  }
  for (double v : ticks(y0, y1)) {
    s << "<line x1=\"" << L << "\" y1=\"" << py(v) << "\" x2=\"" << W - R << "\" y2=\"" << py(v)
      << "\" stroke=\"#e5e5e5\"/>\n"
      << "<text x=\"" << L - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">"
      << (log_y ? "1e" + fmt_tick(v) : fmt_tick(v)) << "</text>\n";
  }
  s << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\""
    << H - T - B << "\" fill=\"none\" stroke=\"#333\"/>\n"
    << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 14 << "\" text-anchor=\"middle\">t</text>\n"
    << "<text transform=\"translate(18," << (T + H - B) / 2
    << ") rotate(-90)\" text-anchor=\"middle\">" << escape_xml(ylabel) << "</text>\n";
  double legend_y = T + 16;
  for (const auto& ser : series) {
    std::ostringstream pts;
    pts.precision(7);
    std::size_t count = 0;
    for (std::size_t i = 0; i < ser.x.size(); ++i) {
      if (!std::isfinite(ser.y[i])) continue;
      pts << px(ser.x[i]) << ',' << py(ser.y[i]) << ' ';
      ++count;
    }
    if (count == 1) {
      for (std::size_t i = 0; i < ser.x.size(); ++i) {
        if (std::isfinite(ser.y[i])) {
          s << "<circle cx=\"" << px(ser.x[i]) << "\" cy=\"" << py(ser.y[i]) << "\" r=\"3\" fill=\""
            << ser.color << "\"/>\n";
        }
      }
    } else if (count > 1) {
      s << "<polyline fill=\"none\" stroke=\"" << ser.color << "\" stroke-width=\"1.5\" points=\""
        << pts.str() << "\"/>\n";
    }
    if (series.size() > 1) {
      s << "<text x=\"" << W - R - 8 << "\" y=\"" << legend_y << "\" text-anchor=\"end\" fill=\""
        << ser.color << "\">" << escape_xml(ser.label) << "</text>\n";
      legend_y += 16;
    }
  }
  s << "</svg>\n";
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw io::FormatError("cannot write " + path.string());
  out << text;
}

}  // namespace

std::vector<fs::path> write_plots(const io::CsvTable& table, const fs::path& out) {
  const auto t = table.column("t");
  const auto f = table.column("f_max");
  const auto q1 = table.column("min_q1");
  const auto q2 = table.column("min_q2");
  const auto v = table.column("v_preserved");
  const auto pinch = table.column("pinch_ratio");
  if (table.rows.empty()) throw io::FormatError("empty trajectory");

  std::vector<double> logf, drift;
  for (double x : f) logf.push_back(x > 0.0 ? std::log10(x) : NAN);
  for (double x : v) drift.push_back(x / v.front() - 1.0);

  fs::create_directories(out);
  const std::vector<std::pair<std::string, std::string>> charts = {
      {"f_max.svg", svg_chart("Umbilicity deficit", "f_max (log scale)",
                              {{"f_max", t, logf, "#1f77b4"}}, true)},
      {"min_q.svg", svg_chart("Pinching quantities", "min Q",
                              {{"min K/H^n", t, q1, "#1f77b4"}, {"min K/F^n", t, q2, "#d62728"}},
                              false)},
      {"volume_drift.svg", svg_chart("Preserved mixed volume drift", "V(t)/V(0) - 1",
                                     {{"drift", t, drift, "#2ca02c"}}, false)},
      {"pinch_ratio.svg", svg_chart("Curvature pinching", "max lambda_n / lambda_1",
                                    {{"pinch", t, pinch, "#9467bd"}}, false)},
  };
  std::vector<fs::path> paths;
  for (const auto& [name, svg] : charts) {
    write_text(out / name, svg);
    paths.push_back(out / name);
  }
  return paths;
}

int cmd_plot(const fs::path& trajectory_csv, const fs::path& out) {
  try {
    write_plots(io::read_csv(trajectory_csv), out);
    return kOk;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kError;
  }
}

}  // namespace mvflow::cli
