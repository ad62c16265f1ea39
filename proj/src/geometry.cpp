#include "mvflow/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mvflow/curvfun.hpp"

namespace mvflow::geometry {

using std::numbers::pi;

double unit_ball_volume(int dim) {
  return std::pow(pi, dim / 2.0) / std::tgamma(dim / 2.0 + 1.0);
}

double sphere_area(int n) { return (n + 1) * unit_ball_volume(n + 1); }

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const auto half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

namespace {

void check_support(std::span<const double> h) {
  for (double v : h) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw DomainError("support values must be positive and finite");
    }
  }
}

void normalize_weights(std::vector<double>& w, int n) {
  const double scale = sphere_area(n) / pairwise_sum(w);
  for (auto& x : w) x *= scale;
}

double max_abs(std::span<const double> h) {
  double m = 0.0;
  for (double v : h) m = std::max(m, std::abs(v));
  return m;
}

// Four-point Lagrange weights for offset t in [0,1) between nodes 0 and 1
// of the stencil {-1, 0, 1, 2}.
std::array<double, 4> cubic_weights(double t) {
  return {-t * (t - 1.0) * (t - 2.0) / 6.0, (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
          -(t + 1.0) * t * (t - 2.0) / 2.0, (t + 1.0) * t * (t - 1.0) / 6.0};
}

}  // namespace

// ---------------------------------------------------------------------------
// Axisymmetric grid

struct AxisymGrid {
  int n = 0;
  int intervals = 0;
  double dtheta = 0.0;
  std::vector<double> theta, cos_theta, cot_theta, weights;
};

namespace {

std::shared_ptr<const AxisymGrid> make_axisym_grid(int n, int intervals) {
  auto g = std::make_shared<AxisymGrid>();
  g->n = n;
  g->intervals = intervals;
  g->dtheta = pi / intervals;
  const auto nodes = static_cast<std::size_t>(intervals + 1);
  g->theta.resize(nodes);
  g->cos_theta.resize(nodes);
  g->cot_theta.resize(nodes, 0.0);
  g->weights.resize(nodes);
  const double ring = sphere_area(n - 1);  // |S^{n-1}|
  for (std::size_t j = 0; j < nodes; ++j) {
    const double th = j * g->dtheta;
    g->theta[j] = th;
    const double s = (j == 0 || j == nodes - 1) ? 0.0 : std::sin(th);
    g->cos_theta[j] = (j == 0) ? 1.0 : (j == nodes - 1 ? -1.0 : std::cos(th));
    if (s > 0.0) g->cot_theta[j] = g->cos_theta[j] / s;
    g->weights[j] = ring * g->dtheta * std::pow(s, n - 1);
  }
  if (n == 2) {
    // Euler-Maclaurin end correction for the |sin theta| kink at the poles.
    const double corr = ring * g->dtheta * g->dtheta / 12.0;
    g->weights.front() += corr;
    g->weights.back() += corr;
  }
  normalize_weights(g->weights, n);
  return g;
}

}  // namespace

AxisymProfile::AxisymProfile(int n, std::vector<double> h) : h_(std::move(h)) {
  if (n < 2) throw DomainError("axisymmetric profile requires n >= 2");
  if (h_.size() < 9) throw DomainError("axisymmetric profile requires at least 8 intervals");
  check_support(h_);
  grid_ = make_axisym_grid(n, static_cast<int>(h_.size()) - 1);
}

AxisymProfile::AxisymProfile(std::shared_ptr<const AxisymGrid> grid, std::vector<double> h)
    : grid_(std::move(grid)), h_(std::move(h)) {
  if (h_.size() != grid_->theta.size()) throw DomainError("support size does not match grid");
  check_support(h_);
}

int AxisymProfile::n() const noexcept { return grid_->n; }
int AxisymProfile::intervals() const noexcept { return grid_->intervals; }
double AxisymProfile::dtheta() const noexcept { return grid_->dtheta; }
double AxisymProfile::theta(std::size_t j) const { return grid_->theta.at(j); }

AxisymProfile AxisymProfile::with_support(std::vector<double> h) const {
  return AxisymProfile(grid_, std::move(h));
}

AxisymRadii principal_radii_axisym(const AxisymProfile& p) {
  const auto& g = p.grid();
  const auto h = p.h();
  const int N = g.intervals;
  // Extended array with two mirror ghosts on each side: h(-t) = h(t),
  // h(pi + t) = h(pi - t).
  std::vector<double> e(static_cast<std::size_t>(N + 5));
  for (int j = 0; j <= N; ++j) e[j + 2] = h[j];
  e[1] = h[1];
  e[0] = h[2];
  e[N + 3] = h[N - 1];
  e[N + 4] = h[N - 2];

  const double inv2 = 1.0 / (12.0 * g.dtheta * g.dtheta);
  const double inv1 = 1.0 / (12.0 * g.dtheta);
  const double floor = kRadiusFloor * max_abs(h);
  AxisymRadii out;
  out.meridian.resize(h.size());
  out.rotational.resize(h.size());
  for (int j = 0; j <= N; ++j) {
    const double* s = &e[j];
    const double d2 = (-s[0] + 16.0 * s[1] - 30.0 * s[2] + 16.0 * s[3] - s[4]) * inv2;
    const double rm = d2 + h[j];
    double rr = rm;
    if (j != 0 && j != N) {
      const double d1 = (s[0] - 8.0 * s[1] + 8.0 * s[3] - s[4]) * inv1;
      rr = d1 * g.cot_theta[j] + h[j];
    }
    if (!(rm > floor)) throw ConvexityLoss(static_cast<std::size_t>(j), rm);
    if (!(rr > floor)) throw ConvexityLoss(static_cast<std::size_t>(j), rr);
    out.meridian[j] = rm;
    out.rotational[j] = rr;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Latitude-longitude grid

struct SphereGrid {
  int n_theta = 0;
  int n_phi = 0;
  double dtheta = 0.0;
  double dphi = 0.0;
  std::vector<double> row_sin, row_cos, row_cot;  // by row 0..n_theta
  std::vector<double> col_cos, col_sin, col_cos2, col_sin2;
  std::vector<double> weights;  // by node
};

namespace {

std::shared_ptr<const SphereGrid> make_sphere_grid(int n_theta, int n_phi) {
  auto g = std::make_shared<SphereGrid>();
  g->n_theta = n_theta;
  g->n_phi = n_phi;
  g->dtheta = pi / n_theta;
  g->dphi = 2.0 * pi / n_phi;
  for (int j = 0; j <= n_theta; ++j) {
    const double th = j * g->dtheta;
    const bool pole = (j == 0 || j == n_theta);
    const double s = pole ? 0.0 : std::sin(th);
    const double c = j == 0 ? 1.0 : (j == n_theta ? -1.0 : std::cos(th));
    g->row_sin.push_back(s);
    g->row_cos.push_back(c);
    g->row_cot.push_back(pole ? 0.0 : c / s);
  }
  for (int k = 0; k < n_phi; ++k) {
    const double ph = k * g->dphi;
    g->col_cos.push_back(std::cos(ph));
    g->col_sin.push_back(std::sin(ph));
    g->col_cos2.push_back(std::cos(2.0 * ph));
    g->col_sin2.push_back(std::sin(2.0 * ph));
  }
  const double pole_w = 2.0 * pi * g->dtheta * g->dtheta / 12.0;
  g->weights.push_back(pole_w);
  for (int j = 1; j < n_theta; ++j) {
    for (int k = 0; k < n_phi; ++k) g->weights.push_back(g->dtheta * g->dphi * g->row_sin[j]);
  }
  g->weights.push_back(pole_w);
  normalize_weights(g->weights, 2);
  return g;
}

}  // namespace

SphereGrid2D::SphereGrid2D(int n_theta, int n_phi, std::vector<double> h) : h_(std::move(h)) {
  if (n_theta < 4 || n_phi < 4 || n_phi % 2 != 0) {
    throw DomainError("sphere grid requires n_theta >= 4 and even n_phi >= 4");
  }
  const auto expected = static_cast<std::size_t>((n_theta - 1) * n_phi + 2);
  if (h_.size() != expected) throw DomainError("support size does not match sphere grid");
  check_support(h_);
  grid_ = make_sphere_grid(n_theta, n_phi);
}

SphereGrid2D::SphereGrid2D(std::shared_ptr<const SphereGrid> grid, std::vector<double> h)
    : grid_(std::move(grid)), h_(std::move(h)) {
  if (h_.size() != grid_->weights.size()) throw DomainError("support size does not match grid");
  check_support(h_);
}

int SphereGrid2D::n_theta() const noexcept { return grid_->n_theta; }
int SphereGrid2D::n_phi() const noexcept { return grid_->n_phi; }
double SphereGrid2D::dtheta() const noexcept { return grid_->dtheta; }
double SphereGrid2D::dphi() const noexcept { return grid_->dphi; }

std::size_t SphereGrid2D::index(int row, int col) const {
  if (row <= 0) return 0;
  if (row >= n_theta()) return h_.size() - 1;
  const int np = n_phi();
  col = ((col % np) + np) % np;
  return static_cast<std::size_t>(1 + (row - 1) * np + col);
}

double SphereGrid2D::at(int row, int col) const {
  const int nt = n_theta();
  if (row < 0) return h_[index(-row, col + n_phi() / 2)];
  if (row > nt) return h_[index(2 * nt - row, col + n_phi() / 2)];
  return h_[index(row, col)];
}

double SphereGrid2D::theta(std::size_t node) const {
  if (node == 0) return 0.0;
  if (node == h_.size() - 1) return pi;
  return (1 + static_cast<int>((node - 1) / n_phi())) * dtheta();
}

double SphereGrid2D::phi(std::size_t node) const {
  if (node == 0 || node == h_.size() - 1) return 0.0;
  return static_cast<int>((node - 1) % n_phi()) * dphi();
}

SphereGrid2D SphereGrid2D::with_support(std::vector<double> h) const {
  return SphereGrid2D(grid_, std::move(h));
}

std::vector<std::array<double, 2>> principal_radii_sphere2d(const SphereGrid2D& s) {
  const auto& g = s.grid();
  const int nt = g.n_theta, np = g.n_phi;
  const double dt = g.dtheta, dp = g.dphi;
  const double floor = kRadiusFloor * max_abs(s.h());
  std::vector<std::array<double, 2>> out(s.node_count());

  auto eig2 = [&](double a11, double a12, double a22, std::size_t node) {
    const double mean = 0.5 * (a11 + a22);
    const double rad = std::hypot(0.5 * (a11 - a22), a12);
    const std::array<double, 2> r{mean + rad, mean - rad};
    if (!(r[1] > floor)) throw ConvexityLoss(node, r[1]);
    return r;
  };

  // Poles: second-order Taylor fit to the first ring, read off from its
  // Fourier modes 0 and 2.
  auto pole = [&](int ring, std::size_t node) {
    const double h0 = s.h()[node];
    double c0 = 0.0, c2 = 0.0, s2 = 0.0;
    for (int k = 0; k < np; ++k) {
      const double v = s.at(ring, k);
      c0 += v;
      c2 += v * g.col_cos2[k];
      s2 += v * g.col_sin2[k];
    }
    c0 /= np;
    c2 *= 2.0 / np;
    s2 *= 2.0 / np;
    const double r2 = dt * dt;
    const double trace = 4.0 * (c0 - h0) / r2;
    const double diff = 4.0 * c2 / r2;
    const double hxy = 2.0 * s2 / r2;
    return eig2(0.5 * (trace + diff) + h0, hxy, 0.5 * (trace - diff) + h0, node);
  };
  out.front() = pole(1, 0);
  out.back() = pole(nt - 1, s.node_count() - 1);

  for (int j = 1; j < nt; ++j) {
    const double sn = g.row_sin[j], ct = g.row_cot[j];
    for (int k = 0; k < np; ++k) {
      const double h = s.at(j, k);
      const double ht = (s.at(j + 1, k) - s.at(j - 1, k)) / (2.0 * dt);
      const double htt = (s.at(j + 1, k) - 2.0 * h + s.at(j - 1, k)) / (dt * dt);
      const double hp = (s.at(j, k + 1) - s.at(j, k - 1)) / (2.0 * dp);
      const double hpp = (s.at(j, k + 1) - 2.0 * h + s.at(j, k - 1)) / (dp * dp);
      const double htp = (s.at(j + 1, k + 1) - s.at(j + 1, k - 1) - s.at(j - 1, k + 1) +
                          s.at(j - 1, k - 1)) /
                         (4.0 * dt * dp);
      const double a11 = htt + h;
      const double a22 = hpp / (sn * sn) + ct * ht + h;
      const double a12 = (htp - ct * hp) / sn;
      const auto node = s.index(j, k);
      out[node] = eig2(a11, a12, a22, node);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Body dispatch

int dimension(const Body& body) {
  return std::visit(
      [](const auto& b) {
        if constexpr (std::is_same_v<std::decay_t<decltype(b)>, AxisymProfile>) {
          return b.n();
        } else {
          return 2;
        }
      },
      body);
}

std::size_t node_count(const Body& body) {
  return std::visit([](const auto& b) { return b.node_count(); }, body);
}

std::span<const double> support(const Body& body) {
  return std::visit([](const auto& b) { return b.h(); }, body);
}

Body with_support(const Body& body, std::vector<double> h) {
  return std::visit([&](const auto& b) -> Body { return b.with_support(std::move(h)); }, body);
}

std::span<const double> sphere_weights(const Body& body) {
  return std::visit([](const auto& b) -> std::span<const double> { return b.grid().weights; },
                    body);
}

std::vector<double> normal_components(const Body& body, std::size_t node) {
  if (const auto* a = std::get_if<AxisymProfile>(&body)) {
    return {a->grid().cos_theta.at(node)};
  }
  const auto& s = std::get<SphereGrid2D>(body);
  const auto& g = s.grid();
  if (node == 0) return {0.0, 0.0, 1.0};
  if (node == s.node_count() - 1) return {0.0, 0.0, -1.0};
  const auto row = static_cast<std::size_t>(1 + (node - 1) / g.n_phi);
  const auto col = static_cast<std::size_t>((node - 1) % g.n_phi);
  return {g.row_sin[row] * g.col_cos[col], g.row_sin[row] * g.col_sin[col], g.row_cos[row]};
}

double stability_spacing(const Body& body) {
  if (const auto* a = std::get_if<AxisymProfile>(&body)) return a->dtheta();
  const auto& s = std::get<SphereGrid2D>(body);
  return std::min(s.dtheta(), s.grid().row_sin[1] * s.dphi());
}

// ---------------------------------------------------------------------------

CurvatureField curvatures(const Body& body) {
  CurvatureField c;
  c.n = dimension(body);
  const auto nodes = node_count(body);
  const auto n = static_cast<std::size_t>(c.n);
  c.radii.resize(nodes * n);
  c.lambda.resize(nodes * n);
  c.weight.resize(nodes);
  const auto ws = sphere_weights(body);
  c.sphere_weight.assign(ws.begin(), ws.end());

  auto fill = [&](std::size_t j, double r_big, double r_small, std::size_t small_count) {
    // Descending radii: (n - small_count) copies of r_big then r_small.
    double prod = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = i < n - small_count ? r_big : r_small;
      c.radii[j * n + i] = r;
      c.lambda[j * n + i] = 1.0 / r;
      prod *= r;
    }
    c.weight[j] = prod * ws[j];
  };

  if (const auto* a = std::get_if<AxisymProfile>(&body)) {
    const auto r = principal_radii_axisym(*a);
    for (std::size_t j = 0; j < nodes; ++j) {
      const double rm = r.meridian[j], rr = r.rotational[j];
      if (rm >= rr) {
        fill(j, rm, rr, n - 1);
      } else {
        fill(j, rr, rm, 1);
      }
    }
  } else {
    const auto r = principal_radii_sphere2d(std::get<SphereGrid2D>(body));
    for (std::size_t j = 0; j < nodes; ++j) fill(j, r[j][0], r[j][1], 1);
  }
  return c;
}

double surface_integral(const CurvatureField& curv, std::span<const double> field) {
  if (field.size() != curv.nodes()) throw DomainError("field size does not match node count");
  std::vector<double> terms(field.size());
  for (std::size_t j = 0; j < field.size(); ++j) terms[j] = field[j] * curv.weight[j];
  return pairwise_sum(terms);
}

double curvature_integral(const CurvatureField& curv, int m) {
  const int n = curv.n;
  if (m < 0 || m > n) throw DomainError("curvature integral index out of range");
  std::vector<double> terms(curv.nodes());
  for (std::size_t j = 0; j < curv.nodes(); ++j) {
    terms[j] = curv.sphere_weight[j] *
               curvfun::elementary_symmetric_without(n - m, curv.radii_at(j), -1);
  }
  return pairwise_sum(terms);
}

double mixed_volume(const Body& body, const CurvatureField& curv, int m) {
  const int n = curv.n;
  if (m < -1 || m > n) throw DomainError("mixed volume index must lie in -1..n");
  if (m == -1) return surface_integral(curv, support(body)) / (n + 1);
  return curvature_integral(curv, m) / ((n + 1) * curvfun::binomial(n, m));
}

double mixed_volume(const Body& body, int m) { return mixed_volume(body, curvatures(body), m); }

// ---------------------------------------------------------------------------

std::vector<double> centered_support(const Body& body, std::vector<double>* steiner_out) {
  const auto h = support(body);
  const auto ws = sphere_weights(body);
  const auto nodes = h.size();
  const auto dim = normal_components(body, 0).size();
  // Least-squares fit of <s, u>; normalising by the discrete Gram matrix
  // makes the centre exactly translation-equivariant.
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim),
                                               static_cast<Eigen::Index>(dim));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  std::vector<std::vector<double>> normals(nodes);
  for (std::size_t j = 0; j < nodes; ++j) {
    normals[j] = normal_components(body, j);
    for (std::size_t a = 0; a < dim; ++a) {
      rhs(a) += ws[j] * h[j] * normals[j][a];
      for (std::size_t b = 0; b < dim; ++b) gram(a, b) += ws[j] * normals[j][a] * normals[j][b];
    }
  }
  const Eigen::VectorXd s = gram.ldlt().solve(rhs);
  std::vector<double> out(nodes);
  for (std::size_t j = 0; j < nodes; ++j) {
    double dot = 0.0;
    for (std::size_t a = 0; a < dim; ++a) dot += s(a) * normals[j][a];
    out[j] = h[j] - dot;
  }
  if (steiner_out) steiner_out->assign(s.data(), s.data() + s.size());
  return out;
}

RadiusBounds radii_bounds(const Body& body, const CurvatureField& curv) {
  RadiusBounds b;
  const auto hc = centered_support(body, &b.steiner);
  const auto [lo, hi] = std::minmax_element(hc.begin(), hc.end());
  b.rho_minus = *lo;
  b.rho_plus = *hi;
  const int n = curv.n;
  for (std::size_t j = 0; j < curv.nodes(); ++j) {
    const auto lam = curv.lambda_at(j);
    b.pinch_ratio = std::max(b.pinch_ratio, lam[n - 1] / lam[0]);
  }
  b.bound = (n + 2) / std::sqrt(2.0) * b.pinch_ratio;
  b.bound_holds = b.rho_plus <= b.bound * b.rho_minus;
  return b;
}

// ---------------------------------------------------------------------------

Body resample(const Body& body, int resolution, int n_phi) {
  if (resolution < 16) throw DomainError("resample target must have at least 16 intervals");
  if (const auto* a = std::get_if<AxisymProfile>(&body)) {
    const int N = a->intervals();
    const auto h = a->h();
    auto ext = [&](int j) {  // mirror-extended profile
      if (j < 0) j = -j;
      if (j > N) j = 2 * N - j;
      return h[static_cast<std::size_t>(j)];
    };
    std::vector<double> out(static_cast<std::size_t>(resolution + 1));
    for (int i = 0; i <= resolution; ++i) {
      const double x = static_cast<double>(i) * N / resolution;
      const int base = static_cast<int>(std::floor(x));
      const double t = x - base;
      if (t < 1e-13) {
        out[i] = ext(base);
        continue;
      }
      const auto w = cubic_weights(t);
      out[i] = w[0] * ext(base - 1) + w[1] * ext(base) + w[2] * ext(base + 1) + w[3] * ext(base + 2);
    }
    return AxisymProfile(a->n(), std::move(out));
  }

  const auto& s = std::get<SphereGrid2D>(body);
  const int nt = s.n_theta(), np = s.n_phi();
  const int new_np = n_phi > 0 ? n_phi : np;
  if (new_np < 4 || new_np % 2 != 0) throw DomainError("n_phi must be even and >= 4");
  // Cubic in phi along a (possibly ghost) row.
  auto along_row = [&](int row, double phi) {
    const double x = phi / s.dphi();
    const int base = static_cast<int>(std::floor(x));
    const double t = x - base;
    if (t < 1e-13) return s.at(row, base);
    const auto w = cubic_weights(t);
    return w[0] * s.at(row, base - 1) + w[1] * s.at(row, base) + w[2] * s.at(row, base + 1) +
           w[3] * s.at(row, base + 2);
  };
  auto sample = [&](double theta, double phi) {
    const double x = theta / s.dtheta();
    const int base = static_cast<int>(std::floor(x));
    const double t = x - base;
    // Ghost rows beyond a pole live on the antipodal meridian.
    auto row_value = [&](int row) {
      if (row <= 0 || row >= nt) {
        if (row == 0 || row == nt) return s.at(row, 0);
        const int mirrored = row < 0 ? -row : 2 * nt - row;
        return along_row(mirrored, phi + std::numbers::pi);
      }
      return along_row(row, phi);
    };
    if (t < 1e-13) return row_value(base);
    const auto w = cubic_weights(t);
    return w[0] * row_value(base - 1) + w[1] * row_value(base) + w[2] * row_value(base + 1) +
           w[3] * row_value(base + 2);
  };
  const double new_dt = std::numbers::pi / resolution;
  const double new_dp = 2.0 * std::numbers::pi / new_np;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>((resolution - 1) * new_np + 2));
  out.push_back(s.h().front());
  for (int j = 1; j < resolution; ++j) {
    for (int k = 0; k < new_np; ++k) out.push_back(sample(j * new_dt, k * new_dp));
  }
  out.push_back(s.h().back());
  return SphereGrid2D(resolution, new_np, std::move(out));
}

Body translate(const Body& body, std::span<const double> v) {
  const auto h = support(body);
  std::vector<double> out(h.begin(), h.end());
  const auto dim = normal_components(body, 0).size();
  if (v.size() != dim) {
    throw DomainError("translation must have " + std::to_string(dim) + " component(s)");
  }
  for (std::size_t j = 0; j < out.size(); ++j) {
    const auto u = normal_components(body, j);
    for (std::size_t a = 0; a < dim; ++a) out[j] += v[a] * u[a];
  }
  return with_support(body, std::move(out));
}

}  // namespace mvflow::geometry
