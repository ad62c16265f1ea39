#pragma once

// Symmetric curvature functions on the positive cone: elementary symmetric
// functions, the admissible speed families, their derivatives, and sampled
// certification of the structural conditions (monotone, homogeneous,
// convex or concave).

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvflow/errors.hpp"

namespace mvflow::curvfun {

/// Principal curvatures, sorted ascending, strictly inside the positive cone.
class LambdaVector {
 public:
  /// Sorts the entries and rejects anything with min <= 1e-12 * max.
  explicit LambdaVector(std::vector<double> entries);
  LambdaVector(std::initializer_list<double> entries)
      : LambdaVector(std::vector<double>(entries)) {}

  std::span<const double> entries() const noexcept { return entries_; }
  int size() const noexcept { return static_cast<int>(entries_.size()); }
  double operator[](int i) const { return entries_[static_cast<std::size_t>(i)]; }
  double min() const { return entries_.front(); }
  double max() const { return entries_.back(); }

 private:
  std::vector<double> entries_;
};

/// Relative floor used for cone membership.
inline constexpr double kConeTolerance = 1e-12;

/// Throws ConeViolation unless every entry exceeds kConeTolerance * max.
void check_cone(std::span<const double> lambda);

enum class Family { MeanH, NormOfA, GammaK, QuotientEml, PowerMean };
enum class CurvatureClass { Convex, Concave };

/// A member of the admissible curvature-function registry. The evaluated
/// function is always normalised so that f(1,...,1) = 1.
struct CurvatureSpec {
  Family family = Family::MeanH;
  int k = 0;       // GammaK degree
  int m = 0;       // QuotientEml numerator index
  int l = 0;       // QuotientEml denominator index
  double r = 1.0;  // PowerMean exponent

  static CurvatureSpec mean_h() { return {}; }
  static CurvatureSpec norm_of_a() { return {Family::NormOfA}; }
  static CurvatureSpec gamma_k(int k) { return {Family::GammaK, k}; }
  static CurvatureSpec quotient(int m, int l) { return {Family::QuotientEml, 0, m, l}; }
  static CurvatureSpec power_mean(double r) { return {Family::PowerMean, 0, 0, 0, r}; }

  /// Parses the forms produced by name(): "MeanH", "NormOfA", "GammaK(3)",
  /// "QuotientEml(2,0)", "PowerMean(-1)".
  static CurvatureSpec parse(std::string_view text);

  std::string name() const;
  CurvatureClass declared_class() const;

  /// Throws DomainError when the parameters are inadmissible in dimension n.
  void validate(int n) const;

  /// Value of the unnormalised family at (1,...,1) in dimension n.
  double normalization(int n) const;

  friend bool operator==(const CurvatureSpec&, const CurvatureSpec&) = default;
};

/// The registry members valid in dimension n (every family, several
/// parameter choices).
std::vector<CurvatureSpec> registry(int n);

struct DerivativeBundle {
  double value = 0.0;
  std::vector<double> gradient;
  std::vector<double> hessian;  // row-major n x n

  int size() const noexcept { return static_cast<int>(gradient.size()); }
  double hess(int i, int j) const {
    return hessian[static_cast<std::size_t>(i * size() + j)];
  }
};

// ---------------------------------------------------------------------------
// Elementary symmetric functions

/// E_m(lambda); E_0 = 1.
double elementary_symmetric(int m, const LambdaVector& lambda);

/// dE_m/dlambda_i = E_{m-1}(lambda without entry i).
std::vector<double> elementary_symmetric_gradient(int m, const LambdaVector& lambda);

/// E_0..E_n by the product expansion of prod(1 + lambda_i t). All terms are
/// non-negative on the cone so the recurrence has no cancellation.
void elementary_symmetric_all(std::span<const double> x, std::span<double> out);

/// E_m of x with entries skip_a and skip_b removed (pass -1 to keep all).
double elementary_symmetric_without(int m, std::span<const double> x, int skip_a,
                                    int skip_b = -1);

/// Complete homogeneous symmetric polynomial h_k(x, extra...).
double complete_symmetric(int k, std::span<const double> x,
                          std::span<const double> extra = {});

// ---------------------------------------------------------------------------
// Curvature functions

/// A spec bound to a dimension, with the normalisation cached. Evaluation
/// methods take raw spans so the flow's inner loops do not allocate; callers
/// are responsible for cone membership there.
class CurvatureFunction {
 public:
  CurvatureFunction(CurvatureSpec spec, int n);

  const CurvatureSpec& spec() const noexcept { return spec_; }
  int dimension() const noexcept { return n_; }

  double value(std::span<const double> lambda) const;
  /// Value and gradient; grad must have size n.
  double value_and_gradient(std::span<const double> lambda, std::span<double> grad) const;
  DerivativeBundle bundle(std::span<const double> lambda) const;

 private:
  CurvatureSpec spec_;
  int n_;
  double norm_;
};

/// Value, gradient and Hessian of the normalised f.
DerivativeBundle eval(const CurvatureSpec& spec, const LambdaVector& lambda);

/// Phi = f^beta with chain-rule derivatives. Throws DomainError for beta < 1.
DerivativeBundle eval_phi(const CurvatureSpec& spec, double beta, const LambdaVector& lambda);

/// Raises a bundle of f to the power beta.
DerivativeBundle power_bundle(const DerivativeBundle& f, double beta);

// ---------------------------------------------------------------------------
// Sampled certification

struct CertificationReport {
  std::string spec;
  int n = 0;
  int samples = 0;
  CurvatureClass declared{};

  double min_gradient = 0.0;  // over all samples and entries
  bool monotone = false;
  double max_euler_residual = 0.0;  // |sum lambda_i f_i - f| / f

  // Hessian eigenvalue extremes relative to the spectral norm at each sample.
  double min_eigen_rel = 0.0;
  double max_eigen_rel = 0.0;
  bool convex = false;
  bool concave = false;

  // Concavity of -f(1/x) and of
  // the standard transform 1/f(1/x).
  bool inverse_concave_negated = false;
  bool inverse_concave_standard = false;
  double inverse_negated_max_eigen_rel = 0.0;
  double inverse_standard_max_eigen_rel = 0.0;

  /// True when the declared class is certified (convex or concave).
  bool class_certified = false;
  std::optional<std::vector<double>> worst_sample;  // violating the declared class
};

/// Evidence, not proof: eigenvalue tolerance is 1e-8 times the Hessian norm.
CertificationReport certify_conditions(const CurvatureSpec& spec, int n, int samples,
                                       std::uint64_t seed);

struct InequalityTally {
  std::string spec;
  CurvatureClass declared{};
  long checked = 0;
  long value_violations = 0;     // F vs H/n
  long gradient_violations = 0;  // sum f_i vs 1
  double worst_value_margin = 0.0;     // most adverse signed relative gap
  double worst_gradient_margin = 0.0;
};

struct DeltaEstimate {
  double epsilon = 0.0;
  double delta = 0.0;  // +inf when vacuous
  long nondegenerate = 0;
  long degenerate = 0;
  bool vacuous = false;  // n * epsilon >= 1: region is the umbilic ray
  std::vector<double> argmin;
};

struct InequalityReport {
  int n = 0;
  int samples = 0;
  std::vector<InequalityTally> specs;
  long maclaurin_checked = 0;
  long maclaurin_violations = 0;  // (E_m / C(n,m))^{1/m} <= H/n
  std::vector<DeltaEstimate> deltas;

  long total_violations() const;
};

/// Samples the positive cone log-uniformly in [1e-3, 1e3]^n and checks the
/// class-matched inequalities for every registry member, Maclaurin's
/// inequality for every m, and estimates the constant delta(eps, n) of
///   (n|A|^2 - H^2)/H^2 >= delta (1/n^n - K/H^n)   where lambda_i >= eps H.
InequalityReport sample_inequalities(int n, int samples, std::uint64_t seed,
                                      std::span<const double> epsilons = {});

/// Ratio (n|A|^2 - H^2)/H^2 / (1/n^n - K/H^n); nullopt when the deficit is
/// below 1e-10 (umbilic up to rounding).
std::optional<double> roundness_ratio(std::span<const double> lambda);

double binomial(int n, int k);

}  // namespace mvflow::curvfun
