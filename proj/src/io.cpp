#include "mvflow/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "mvflow/errors.hpp"

namespace mvflow::io {

namespace fs = std::filesystem;

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(std::string_view cell, const fs::path& path, std::size_t line) {
  while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
  while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\r')) cell.remove_suffix(1);
  double v = 0.0;
  if (cell == "inf" || cell == "+inf") return INFINITY;
  if (cell == "-inf") return -INFINITY;
  if (cell == "nan" || cell == "-nan") return NAN;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
    throw FormatError(path.string() + ":" + std::to_string(line) + ": not a number: '" +
                      std::string(cell) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// CSV

bool CsvTable::has(std::string_view name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

std::size_t CsvTable::index(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw FormatError("missing column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - header.begin());
}

std::vector<double> CsvTable::column(std::string_view name) const {
  const auto c = index(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (table.header.empty()) {
      for (auto c : cells) table.header.emplace_back(c);
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(table.header.size()) + " fields, found " +
                        std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (auto c : cells) row.push_back(parse_double(c, path, lineno));
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw FormatError(path.string() + ": empty file");
  return table;
}

void write_csv(const fs::path& path, const CsvTable& table) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    out << (i ? "," : "") << table.header[i];
  }
  out << '\n';
  for (const auto& r : table.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << format_double(r[i]);
    out << '\n';
  }
  if (!out) throw FormatError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Snapshots

Snapshot make_snapshot(const geometry::Body& body, const geometry::CurvatureField& curv) {
  Snapshot s;
  s.n = curv.n;
  s.has_phi = std::holds_alternative<geometry::SphereGrid2D>(body);
  const auto nodes = curv.nodes();
  const auto h = geometry::support(body);
  s.h.assign(h.begin(), h.end());
  s.weight = curv.weight;
  s.radii.assign(static_cast<std::size_t>(s.n), std::vector<double>(nodes));
  s.lambda.assign(static_cast<std::size_t>(s.n), std::vector<double>(nodes));
  for (std::size_t j = 0; j < nodes; ++j) {
    const auto lam = curv.lambda_at(j);
    const auto rad = curv.radii_at(j);
    for (int i = 0; i < s.n; ++i) {
      s.lambda[i][j] = lam[i];
      s.radii[i][j] = rad[i];
    }
  }
  std::visit(
      [&](const auto& b) {
        for (std::size_t j = 0; j < nodes; ++j) {
          s.theta.push_back(b.theta(j));
          if constexpr (std::is_same_v<std::decay_t<decltype(b)>, geometry::SphereGrid2D>) {
            s.phi.push_back(b.phi(j));
          }
        }
      },
      body);
  return s;
}

void write_snapshot(const fs::path& path, const Snapshot& snap) {
  CsvTable t;
  t.header.push_back("theta");
  if (snap.has_phi) t.header.push_back("phi");
  t.header.push_back("h");
  for (int i = 1; i <= snap.n; ++i) t.header.push_back("R_" + std::to_string(i));
  for (int i = 1; i <= snap.n; ++i) t.header.push_back("lambda_" + std::to_string(i));
  t.header.push_back("weight");
  for (std::size_t j = 0; j < snap.h.size(); ++j) {
    std::vector<double> r{snap.theta[j]};
    if (snap.has_phi) r.push_back(snap.phi[j]);
    r.push_back(snap.h[j]);
    for (const auto& c : snap.radii) r.push_back(c[j]);
    for (const auto& c : snap.lambda) r.push_back(c[j]);
    r.push_back(snap.weight[j]);
    t.rows.push_back(std::move(r));
  }
  write_csv(path, t);
}

Snapshot read_snapshot(const fs::path& path) {
  const auto t = read_csv(path);
  Snapshot s;
  s.has_phi = t.has("phi");
  while (t.has("R_" + std::to_string(s.n + 1))) ++s.n;
  if (s.n == 0) throw FormatError("missing column 'R_1'");
  s.theta = t.column("theta");
  if (s.has_phi) s.phi = t.column("phi");
  s.h = t.column("h");
  for (int i = 1; i <= s.n; ++i) {
    s.radii.push_back(t.column("R_" + std::to_string(i)));
    s.lambda.push_back(t.column("lambda_" + std::to_string(i)));
  }
  s.weight = t.column("weight");
  return s;
}

geometry::Body body_from_snapshot(const Snapshot& snap) {
  if (!snap.has_phi) return geometry::AxisymProfile(snap.n, snap.h);
  const std::size_t nodes = snap.h.size();
  if (nodes < 3) throw FormatError("snapshot too small for a lat-long grid");
  std::size_t n_phi = 0;
  while (1 + n_phi < nodes - 1 && snap.theta[1 + n_phi] == snap.theta[1]) ++n_phi;
  if (n_phi == 0 || (nodes - 2) % n_phi != 0) throw FormatError("irregular lat-long snapshot");
  const int n_theta = static_cast<int>((nodes - 2) / n_phi) + 1;
  return geometry::SphereGrid2D(n_theta, static_cast<int>(n_phi), snap.h);
}

// ---------------------------------------------------------------------------
// Trajectories

namespace {

using Record = analysis::MonitorRecord;

struct Field {
  const char* name;
  double Record::*member;
};

// Columns after t, step, dt, v_preserved and the V_k block.
constexpr Field kTail[] = {
    {"min_q1", &Record::min_q1},       {"min_q2", &Record::min_q2},
    {"f_max", &Record::f_max},         {"pinch_ratio", &Record::pinch_ratio},
    {"speed_min", &Record::speed_min}, {"speed_max", &Record::speed_max},
    {"phi_max", &Record::phi_max},     {"phi_bar", &Record::phi_bar},
    {"rho_minus", &Record::rho_minus}, {"rho_plus", &Record::rho_plus},
    {"z_max", &Record::z_max},         {"f_min", &Record::f_min},
    {"f_min_integral", &Record::f_min_integral},
};

}  // namespace

std::vector<std::string> trajectory_columns(int n) {
  std::vector<std::string> cols{"t", "step", "dt", "v_preserved"};
  for (int k = 0; k <= n + 1; ++k) cols.push_back("V_" + std::to_string(k));
  for (const auto& f : kTail) cols.emplace_back(f.name);
  return cols;
}

void write_trajectory(const fs::path& path, const std::vector<Record>& trajectory) {
  const int n = trajectory.empty() ? 2 : static_cast<int>(trajectory.front().volumes.size()) - 2;
  CsvTable t;
  t.header = trajectory_columns(n);
  for (const auto& r : trajectory) {
    std::vector<double> row{r.t, static_cast<double>(r.step), r.dt, r.v_preserved};
    row.insert(row.end(), r.volumes.begin(), r.volumes.end());
    for (const auto& f : kTail) row.push_back(r.*f.member);
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

std::vector<Record> read_trajectory(const fs::path& path) {
  const auto t = read_csv(path);
  int vcount = 0;
  while (t.has("V_" + std::to_string(vcount))) ++vcount;
  if (vcount < 4) throw FormatError("missing column 'V_" + std::to_string(vcount) + "'");
  for (const auto& c : trajectory_columns(vcount - 2)) t.index(c);

  const auto it = t.index("t"), is = t.index("step"), idt = t.index("dt"),
             iv = t.index("v_preserved"), iv0 = t.index("V_0");
  std::vector<std::size_t> tail;
  for (const auto& f : kTail) tail.push_back(t.index(f.name));
  std::vector<Record> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    Record r;
    r.t = row[it];
    r.step = static_cast<long>(row[is]);
    r.dt = row[idt];
    r.v_preserved = row[iv];
    for (int k = 0; k < vcount; ++k) r.volumes.push_back(row[iv0 + k]);
    for (std::size_t i = 0; i < tail.size(); ++i) r.*kTail[i].member = row[tail[i]];
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

constexpr std::pair<flow::InitialKind, const char*> kInitialNames[] = {
    {flow::InitialKind::Sphere, "sphere"},       {flow::InitialKind::Spheroid, "spheroid"},
    {flow::InitialKind::Ellipsoid, "ellipsoid"}, {flow::InitialKind::Perturbed, "perturbed"},
    {flow::InitialKind::Random, "random"},
};

const char* backend_name(flow::BackendKind k) {
  return k == flow::BackendKind::Axisym ? "axisym" : "sphere2d";
}

const char* family_name(curvfun::Family f) {
  switch (f) {
    case curvfun::Family::MeanH: return "MeanH";
    case curvfun::Family::NormOfA: return "NormOfA";
    case curvfun::Family::GammaK: return "GammaK";
    case curvfun::Family::QuotientEml: return "QuotientEml";
    case curvfun::Family::PowerMean: return "PowerMean";
  }
  return "";
}

std::vector<std::string> initial_params(flow::InitialKind k) {
  switch (k) {
    case flow::InitialKind::Sphere: return {"radius"};
    case flow::InitialKind::Spheroid: return {"a", "c"};
    case flow::InitialKind::Ellipsoid: return {"a", "b", "c"};
    case flow::InitialKind::Perturbed: return {"radius", "degree", "order", "amplitude"};
    case flow::InitialKind::Random: return {"radius", "degree", "amplitude"};
  }
  return {};
}

std::vector<std::string> spec_params(curvfun::Family f) {
  switch (f) {
    case curvfun::Family::GammaK: return {"k"};
    case curvfun::Family::QuotientEml: return {"m", "l"};
    case curvfun::Family::PowerMean: return {"r"};
    default: return {};
  }
}

// Strict object reader: every key must be consumed.
class Reader {
 public:
  Reader(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  const json* find(const std::string& key) {
    const auto it = obj_.find(key);
    if (it == obj_.end()) return nullptr;
    used_.insert(key);
    return &*it;
  }

  double number(const std::string& key, double fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number()) throw ConfigError(path(key) + ": expected a number");
    return v->get<double>();
  }

  long integer(const std::string& key, long fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (v->is_number_integer()) return v->get<long>();
    if (v->is_number_float()) {
      const double d = v->get<double>();
      if (std::floor(d) == d && std::abs(d) < 9e15) return static_cast<long>(d);
    }
    throw ConfigError(path(key) + ": expected an integer");
  }

  std::string text(const std::string& key, std::string fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_string()) throw ConfigError(path(key) + ": expected a string");
    return v->get<std::string>();
  }

  void finish() const {
    for (const auto& [key, _] : obj_.items()) {
      if (!used_.contains(key)) throw ConfigError(path(key) + ": unknown key");
    }
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

 private:
  const json& obj_;
  std::string where_;
  std::set<std::string> used_;
};

void reject_foreign(Reader& r, const json& params, const std::vector<std::string>& allowed) {
  for (const auto& [key, _] : params.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(r.path(key) + ": not a parameter of this kind");
    }
  }
}

}  // namespace

curvfun::CurvatureSpec spec_from_json(const json& v) {
  if (v.is_string()) {
    try {
      return curvfun::CurvatureSpec::parse(v.get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config.spec: ") + e.what());
    }
  }
  Reader r(v, "config.spec");
  const auto family = r.text("family", "MeanH");
  curvfun::CurvatureSpec spec;
  bool known = false;
  for (auto f : {curvfun::Family::MeanH, curvfun::Family::NormOfA, curvfun::Family::GammaK,
                 curvfun::Family::QuotientEml, curvfun::Family::PowerMean}) {
    if (family == family_name(f)) {
      spec.family = f;
      known = true;
    }
  }
  if (!known) throw ConfigError("config.spec.family: unknown family '" + family + "'");
  if (const json* p = r.find("params")) {
    Reader pr(*p, "config.spec.params");
    reject_foreign(pr, *p, spec_params(spec.family));
    spec.k = static_cast<int>(pr.integer("k", spec.family == curvfun::Family::GammaK ? 2 : 0));
    spec.m = static_cast<int>(pr.integer("m", 0));
    spec.l = static_cast<int>(pr.integer("l", 0));
    spec.r = pr.number("r", 1.0);
    pr.finish();
  } else if (spec.family == curvfun::Family::GammaK) {
    spec.k = 2;
  }
  r.finish();
  return spec;
}

json config_to_json(const flow::FlowConfig& c) {
  json spec_params_obj = json::object();
  switch (c.spec.family) {
    case curvfun::Family::GammaK: spec_params_obj["k"] = c.spec.k; break;
    case curvfun::Family::QuotientEml:
      spec_params_obj["m"] = c.spec.m;
      spec_params_obj["l"] = c.spec.l;
      break;
    case curvfun::Family::PowerMean: spec_params_obj["r"] = c.spec.r; break;
    default: break;
  }
  json init_params = json::object();
  const auto& i = c.initial;
  for (const auto& key : initial_params(i.kind)) {
    if (key == "radius") init_params[key] = i.radius;
    if (key == "a") init_params[key] = i.a;
    if (key == "b") init_params[key] = i.b;
    if (key == "c") init_params[key] = i.c;
    if (key == "degree") init_params[key] = i.degree;
    if (key == "order") init_params[key] = i.order;
    if (key == "amplitude") init_params[key] = i.amplitude;
  }
  const char* init_name = "";
  for (const auto& [k, name] : kInitialNames) {
    if (k == i.kind) init_name = name;
  }
  json backend = {{"kind", backend_name(c.backend.kind)}, {"resolution", c.backend.resolution}};
  if (c.backend.kind == flow::BackendKind::Sphere2D) {
    backend["n_phi"] = c.backend.n_phi > 0 ? c.backend.n_phi : 2 * c.backend.resolution;
  }
  return {
      {"n", c.n},
      {"spec", {{"family", family_name(c.spec.family)}, {"params", spec_params_obj}}},
      {"beta", c.beta},
      {"m_index", c.m_index},
      {"backend", backend},
      {"initial", {{"kind", init_name}, {"params", init_params}}},
      {"cfl_safety", c.cfl_safety},
      {"t_end", c.t_end},
      {"max_steps", c.max_steps},
      {"f_tolerance", c.f_tolerance},
      {"cadence", c.cadence},
      {"converge_window", c.converge_window},
      {"snapshot_every", c.snapshot_every},
      {"seed", c.seed},
  };
}

flow::FlowConfig config_from_json(const json& doc) {
  flow::FlowConfig c;
  Reader r(doc, "config");
  c.n = static_cast<int>(r.integer("n", c.n));
  if (const json* s = r.find("spec")) c.spec = spec_from_json(*s);
  c.beta = r.number("beta", c.beta);
  c.m_index = static_cast<int>(r.integer("m_index", c.m_index));
  if (const json* b = r.find("backend")) {
    Reader br(*b, "config.backend");
    const auto kind = br.text("kind", "axisym");
    if (kind == "axisym") {
      c.backend.kind = flow::BackendKind::Axisym;
    } else if (kind == "sphere2d") {
      c.backend.kind = flow::BackendKind::Sphere2D;
    } else {
      throw ConfigError("config.backend.kind: expected 'axisym' or 'sphere2d', got '" + kind + "'");
    }
    c.backend.resolution = static_cast<int>(br.integer("resolution", c.backend.resolution));
    c.backend.n_phi = static_cast<int>(br.integer("n_phi", 0));
    br.finish();
  }
  if (const json* init = r.find("initial")) {
    Reader ir(*init, "config.initial");
    const auto kind = ir.text("kind", "spheroid");
    bool known = false;
    for (const auto& [k, name] : kInitialNames) {
      if (kind == name) {
        c.initial.kind = k;
        known = true;
      }
    }
    if (!known) throw ConfigError("config.initial.kind: unknown kind '" + kind + "'");
    if (const json* p = ir.find("params")) {
      Reader pr(*p, "config.initial.params");
      reject_foreign(pr, *p, initial_params(c.initial.kind));
      auto& i = c.initial;
      i.radius = pr.number("radius", i.radius);
      i.a = pr.number("a", i.a);
      i.b = pr.number("b", i.b);
      i.c = pr.number("c", i.c);
      i.degree = static_cast<int>(pr.integer("degree", i.degree));
      i.order = static_cast<int>(pr.integer("order", i.order));
      i.amplitude = pr.number("amplitude", i.amplitude);
      pr.finish();
    }
    if (c.initial.kind == flow::InitialKind::Spheroid) c.initial.b = c.initial.a;
    ir.finish();
  }
  c.cfl_safety = r.number("cfl_safety", c.cfl_safety);
  c.t_end = r.number("t_end", c.t_end);
  c.max_steps = r.integer("max_steps", c.max_steps);
  c.f_tolerance = r.number("f_tolerance", c.f_tolerance);
  c.cadence = static_cast<int>(r.integer("cadence", c.cadence));
  c.converge_window = static_cast<int>(r.integer("converge_window", c.converge_window));
  c.snapshot_every = r.integer("snapshot_every", c.snapshot_every);
  const long seed = r.integer("seed", 0);
  if (seed < 0) throw ConfigError("config.seed: must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  r.finish();
  c.validate();
  return c;
}

flow::FlowConfig parse_config(std::string_view text, std::string_view origin) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t line = 1, column = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::string what = e.what();
    if (const auto pos = what.find("syntax error"); pos != std::string::npos) {
      what = what.substr(pos);
    } else if (const auto br = what.find("] "); br != std::string::npos) {
      what = what.substr(br + 2);
    }
    throw ConfigError(std::string(origin) + ":" + std::to_string(line) + ":" +
                      std::to_string(column) + ": malformed JSON: " + what);
  }
  return config_from_json(doc);
}

flow::FlowConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string config_hash(const flow::FlowConfig& config) {
  const auto text = config_to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Run documents

namespace {

json fit_json(const std::optional<analysis::DecayFit>& fit) {
  if (!fit) return nullptr;
  return {{"rate", fit->rate},
          {"r_squared", fit->r_squared},
          {"t_begin", fit->t_begin},
          {"t_end", fit->t_end},
          {"count", fit->count}};
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

RunDigest digest(const flow::FlowConfig& config, const flow::RunResult& result) {
  RunDigest d;
  const auto& tr = result.trajectory;
  const double v0 = tr.front().v_preserved;
  for (const auto& r : tr) d.max_drift = std::max(d.max_drift, std::abs(r.v_preserved / v0 - 1.0));
  d.f_fit = analysis::fit_decay(tr, analysis::DecayQuantity::FMax, config.f_tolerance);
  d.pinch_fit = analysis::fit_decay(tr, analysis::DecayQuantity::PinchExcess, config.f_tolerance);
  d.monotonicity = analysis::monotonicity_audit(tr, config.spec.declared_class());
  d.limit = analysis::limit_sphere_check(result.final_state, config.law(), v0);
  d.radius_ratio = analysis::radius_ratio_check(tr, config.n);
  return d;
}

json summary_json(const flow::FlowConfig& config, const flow::RunResult& result,
                  const RunDigest& d) {
  const auto& last = result.trajectory.back();
  json out = {
      {"termination", flow::to_string(result.termination)},
      {"steps", result.final_state.step},
      {"t_final", result.final_state.t},
      {"records", result.trajectory.size()},
      {"spec", config.spec.name()},
      {"n", config.n},
      {"beta", config.beta},
      {"m_index", config.m_index},
      {"final",
       {{"rho_minus", last.rho_minus},
        {"rho_plus", last.rho_plus},
        {"pinch_ratio", last.pinch_ratio},
        {"f_max", last.f_max},
        {"r_star", d.limit.r_star},
        {"max_relative_deviation", d.limit.max_relative_deviation}}},
      {"fitted_rate", d.f_fit ? json(d.f_fit->rate) : json(nullptr)},
      {"fit", fit_json(d.f_fit)},
      {"pinch_fit", fit_json(d.pinch_fit)},
      {"conservation_drift", d.max_drift},
      {"monotonicity",
       {{"uses_q2", d.monotonicity.uses_q2},
        {"worst_relative_decrease", d.monotonicity.worst_relative_decrease},
        {"passes", d.monotonicity.passes}}},
      {"radius_ratio_margin", d.radius_ratio.worst_margin},
  };
  if (result.failed_node) {
    out["failed_node"] = *result.failed_node;
    out["failed_value"] = finite_or_null(*result.failed_value);
  }
  return out;
}

json manifest_json(const flow::FlowConfig& config, flow::Termination termination,
                   double wall_clock_seconds) {
  return {
      {"config_hash", config_hash(config)},
      {"version", kVersion},
      {"layout",
       {{"trajectory", "trajectory.csv"},
        {"snapshots", "snapshots/"},
        {"summary", "summary.json"},
        {"audit", "audit.json"},
        {"manifest", "manifest.json"},
        {"config", "config.json"}}},
      {"wall_clock_seconds", wall_clock_seconds},
      {"termination", flow::to_string(termination)},
  };
}

json audit_json(const std::vector<analysis::MonitorRecord>& trajectory, int n, int m_index,
                curvfun::CurvatureClass speed_class, double f_tolerance) {
  if (trajectory.empty()) throw FormatError("empty trajectory");
  const double umbilic = std::pow(static_cast<double>(n), -n);
  bool q1_bound = true, f_nonneg = true, rho_order = true, z_finite = true;
  double max_drift = 0.0;
  const double v0 = trajectory.front().v_preserved;
  for (const auto& r : trajectory) {
    q1_bound = q1_bound && r.min_q1 > 0.0 && r.min_q1 <= umbilic * (1.0 + 1e-10);
    f_nonneg = f_nonneg && r.f_max >= -1e-10 * umbilic;
    rho_order = rho_order && r.rho_minus <= r.rho_plus;
    z_finite = z_finite && std::isfinite(r.z_max);
    max_drift = std::max(max_drift, std::abs(r.v_preserved / v0 - 1.0));
  }
  const auto mono = analysis::monotonicity_audit(trajectory, speed_class);
  const auto rr = analysis::radius_ratio_check(trajectory, n);
  const auto fit = analysis::fit_decay(trajectory, analysis::DecayQuantity::FMax, f_tolerance);
  auto check = [](bool pass, json measured) {
    return json{{"pass", pass}, {"measured", std::move(measured)}};
  };
  json checks = {
      {"min_q1_bound", check(q1_bound, trajectory.back().min_q1)},
      {"f_max_nonnegative", check(f_nonneg, trajectory.back().f_max)},
      {"rho_order", check(rho_order, trajectory.back().rho_plus / trajectory.back().rho_minus)},
      {"z_max_finite", check(z_finite, finite_or_null(trajectory.back().z_max))},
      {"pinching_monotone", check(mono.passes, mono.worst_relative_decrease)},
      {"phi_bounded", check(mono.phi_bounded, finite_or_null(mono.sup_phi_max))},
      {"pinch_nonincreasing_tail", check(mono.pinch_nonincreasing_tail, trajectory.back().pinch_ratio)},
      {"radius_ratio", check(rr.holds, rr.worst_margin)},
      {"decay_fit", check(fit && fit->rate < 0.0, fit_json(fit))},
  };
  bool all = true;
  for (const auto& [_, v] : checks.items()) all = all && v["pass"].get<bool>();
  return {{"n", n},
          {"m_index", m_index},
          {"records", trajectory.size()},
          {"checks", checks},
          {"max_drift", max_drift},
          {"fitted_rate", fit ? json(fit->rate) : json(nullptr)},
          {"pass", all}};
}

void write_json(const fs::path& path, const json& doc) {
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
  if (!out) throw FormatError("write failed: " + path.string());
}

}  // namespace mvflow::io
