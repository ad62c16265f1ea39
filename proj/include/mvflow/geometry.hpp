#pragma once

// Convex bodies discretised by their support function over the unit normal
// sphere S^n. Two backends:
//
//   AxisymProfile  bodies of revolution in R^{n+1}, any n >= 2, sampled at
//                  N+1 polar angles theta_j = j*pi/N.
//   SphereGrid2D   general bodies in R^3 (n = 2) on a latitude-longitude grid
//                  with single shared pole values.
//
// Principal radii are the eigenvalues of Hess(h) + h*I on S^n; the area
// element is dmu = (prod R_i) dsigma.

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include "mvflow/errors.hpp"

namespace mvflow::geometry {

/// Volume of the unit ball in R^dim: pi^{dim/2} / Gamma(dim/2 + 1).
double unit_ball_volume(int dim);

/// |S^n| = (n+1) * omega_{n+1}.
double sphere_area(int n);

/// Radii below kRadiusFloor * max h are treated as loss of strict convexity.
inline constexpr double kRadiusFloor = 1e-10;

/// Deterministic pairwise summation.
double pairwise_sum(std::span<const double> values);

// ---------------------------------------------------------------------------

struct AxisymGrid;

class AxisymProfile {
 public:
  /// h holds the support values at N+1 equally spaced polar angles; N >= 8.
  AxisymProfile(int n, std::vector<double> h);

  int n() const noexcept;
  int intervals() const noexcept;
  std::size_t node_count() const noexcept { return h_.size(); }
  double dtheta() const noexcept;
  double theta(std::size_t j) const;
  std::span<const double> h() const noexcept { return h_; }

  /// Same grid, new support values.
  AxisymProfile with_support(std::vector<double> h) const;

  const AxisymGrid& grid() const noexcept { return *grid_; }

 private:
  AxisymProfile(std::shared_ptr<const AxisymGrid> grid, std::vector<double> h);

  std::shared_ptr<const AxisymGrid> grid_;
  std::vector<double> h_;
};

struct SphereGrid;

class SphereGrid2D {
 public:
  /// Node layout: [north pole, rows j = 1..n_theta-1 each with n_phi values,
  /// south pole]. n_theta >= 4, n_phi >= 4 and even.
  SphereGrid2D(int n_theta, int n_phi, std::vector<double> h);

  int n_theta() const noexcept;
  int n_phi() const noexcept;
  std::size_t node_count() const noexcept { return h_.size(); }
  double dtheta() const noexcept;
  double dphi() const noexcept;
  double theta(std::size_t node) const;
  double phi(std::size_t node) const;
  std::size_t index(int row, int col) const;
  /// Support value at (row, col) with row 0 / n_theta the poles, col
  /// periodic, and rows beyond the poles reflected through the antipodal
  /// meridian.
  double at(int row, int col) const;
  std::span<const double> h() const noexcept { return h_; }

  SphereGrid2D with_support(std::vector<double> h) const;

  const SphereGrid& grid() const noexcept { return *grid_; }

 private:
  SphereGrid2D(std::shared_ptr<const SphereGrid> grid, std::vector<double> h);

  std::shared_ptr<const SphereGrid> grid_;
  std::vector<double> h_;
};

using Body = std::variant<AxisymProfile, SphereGrid2D>;

int dimension(const Body& body);
std::size_t node_count(const Body& body);
std::span<const double> support(const Body& body);
Body with_support(const Body& body, std::vector<double> h);
/// Quadrature weights of the unit sphere measure dsigma at each node; they
/// sum to |S^n| exactly.
std::span<const double> sphere_weights(const Body& body);
/// Unit normal at each node in the body's frame: axis component only for
/// the axisymmetric backend, (x, y, z) for the lat-long backend.
std::vector<double> normal_components(const Body& body, std::size_t node);
/// Grid spacing that controls the explicit stability limit.
double stability_spacing(const Body& body);

// ---------------------------------------------------------------------------

struct AxisymRadii {
  std::vector<double> meridian;
  std::vector<double> rotational;  // multiplicity n-1
};

/// Fourth-order centred differences with mirror ghosts across the poles;
/// at the poles the rotational radius equals the meridian one. Throws
/// ConvexityLoss if any radius falls below the floor.
AxisymRadii principal_radii_axisym(const AxisymProfile& profile);

/// Per-node 2x2 radius pairs (larger first) of the lat-long backend.
std::vector<std::array<double, 2>> principal_radii_sphere2d(const SphereGrid2D& grid);

/// Per-node curvature data.
struct CurvatureField {
  int n = 0;
  std::vector<double> radii;   // node-major, descending (aligned with lambda)
  std::vector<double> lambda;  // node-major, ascending
  std::vector<double> weight;  // dmu
  std::vector<double> sphere_weight;

  std::size_t nodes() const noexcept { return weight.size(); }
  std::span<const double> lambda_at(std::size_t j) const {
    return {lambda.data() + j * static_cast<std::size_t>(n), static_cast<std::size_t>(n)};
  }
  std::span<const double> radii_at(std::size_t j) const {
    return {radii.data() + j * static_cast<std::size_t>(n), static_cast<std::size_t>(n)};
  }
};

CurvatureField curvatures(const Body& body);

/// sum_j field_j * dmu_j.
double surface_integral(const CurvatureField& curv, std::span<const double> field);

/// V_{n-m}: m >= 0 gives [(n+1) C(n,m)]^{-1} int E_m dmu, m = -1 the enclosed
/// volume (n+1)^{-1} int h dmu. Valid m: -1..n.
double mixed_volume(const Body& body, const CurvatureField& curv, int m);
double mixed_volume(const Body& body, int m);

/// int E_m dmu, evaluated as int E_{n-m}(R) dsigma.
double curvature_integral(const CurvatureField& curv, int m);

struct RadiusBounds {
  double rho_minus = 0.0;
  double rho_plus = 0.0;
  std::vector<double> steiner;  // Steiner point in the body's frame
  double pinch_ratio = 1.0;     // max lambda_n / lambda_1
  double bound = 0.0;           // ((n+2)/sqrt 2) * pinch_ratio
  bool bound_holds = true;      // rho_plus / rho_minus <= bound
};

/// Support values about the Steiner point.
std::vector<double> centered_support(const Body& body, std::vector<double>* steiner = nullptr);

/// Inner/outer radius surrogates: min and max of the Steiner-centred support.
RadiusBounds radii_bounds(const Body& body, const CurvatureField& curv);

/// Cubic interpolation onto a new grid (N intervals; n_phi for lat-long,
/// 0 keeps the current count). Throws DomainError below 16 intervals.
Body resample(const Body& body, int resolution, int n_phi = 0);

/// Adds <v, u> to the support function (rigid translation by v). The
/// axisymmetric backend accepts only an axial component.
Body translate(const Body& body, std::span<const double> v);

}  // namespace mvflow::geometry
