#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

#include "mvflow/curvfun.hpp"
#include "mvflow/rng.hpp"

namespace mvflow::curvfun {

namespace {

constexpr double kEigenTolerance = 1e-8;
constexpr double kSampleLo = 1e-3;
constexpr double kSampleHi = 1e3;
constexpr double kInequalityTolerance = 1e-12;

struct EigenExtremes {
  double min_rel = 0.0;
  double max_rel = 0.0;
};

// Eigenvalues relative to the spectral norm, or to `floor` when that is
// larger (matrices assembled from cancelling terms).
EigenExtremes relative_extremes(const Eigen::MatrixXd& m, double floor = 0.0) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();
  const double norm = std::max(ev.cwiseAbs().maxCoeff(), floor);
  if (norm == 0.0) return {};
  return {ev.minCoeff() / norm, ev.maxCoeff() / norm};
}

Eigen::MatrixXd as_matrix(const DerivativeBundle& b) {
  const int n = b.size();
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) m(i, j) = b.hess(i, j);
  }
  return m;
}

std::vector<double> log_uniform_point(Rng& rng, int n) {
  std::vector<double> x(static_cast<std::size_t>(n));
  for (auto& v : x) v = rng.log_uniform(kSampleLo, kSampleHi);
  std::sort(x.begin(), x.end());
  return x;
}

}  // namespace

CertificationReport certify_conditions(const CurvatureSpec& spec, int n, int samples,
                                       std::uint64_t seed) {
  if (samples < 1) throw DomainError("samples must be >= 1");
  const CurvatureFunction f(spec, n);
  CertificationReport rep;
  rep.spec = spec.name();
  rep.n = n;
  rep.samples = samples;
  rep.declared = spec.declared_class();
  rep.min_gradient = std::numeric_limits<double>::infinity();
  rep.min_eigen_rel = std::numeric_limits<double>::infinity();
  rep.max_eigen_rel = -std::numeric_limits<double>::infinity();
  rep.inverse_negated_max_eigen_rel = -std::numeric_limits<double>::infinity();
  rep.inverse_standard_max_eigen_rel = -std::numeric_limits<double>::infinity();
  double worst_violation = 0.0;

  Rng rng(seed);
  for (int s = 0; s < samples; ++s) {
    const auto x = log_uniform_point(rng, n);
    const auto b = f.bundle(x);
    double euler = 0.0;
    for (int i = 0; i < n; ++i) {
      rep.min_gradient = std::min(rep.min_gradient, b.gradient[i]);
      euler += x[i] * b.gradient[i];
    }
    rep.max_euler_residual = std::max(rep.max_euler_residual, std::abs(euler - b.value) / b.value);

    const auto ex = relative_extremes(as_matrix(b));
    rep.min_eigen_rel = std::min(rep.min_eigen_rel, ex.min_rel);
    rep.max_eigen_rel = std::max(rep.max_eigen_rel, ex.max_rel);
    const double violation = rep.declared == CurvatureClass::Convex ? -ex.min_rel : ex.max_rel;
    if (violation > kEigenTolerance && violation > worst_violation) {
      worst_violation = violation;
      rep.worst_sample = x;
    }

    // g(x) = f(1/x): g_ij = f_ij(y) y_i^2 y_j^2 + 2 delta_ij f_i(y) y_i^3.
    std::vector<double> y(x.size());
    for (int i = 0; i < n; ++i) y[i] = 1.0 / x[i];
    const auto by = f.bundle(y);
    Eigen::VectorXd grad_g(n);
    Eigen::MatrixXd hess_g(n, n);
    for (int i = 0; i < n; ++i) {
      grad_g(i) = -by.gradient[i] * y[i] * y[i];
      for (int j = 0; j < n; ++j) {
        hess_g(i, j) = by.hess(i, j) * y[i] * y[i] * y[j] * y[j] +
                       (i == j ? 2.0 * by.gradient[i] * y[i] * y[i] * y[i] : 0.0);
      }
    }
    const double g = by.value;
    const auto negated = relative_extremes(-hess_g);
    const Eigen::MatrixXd t1 = -hess_g / (g * g);
    const Eigen::MatrixXd t2 = 2.0 * grad_g * grad_g.transpose() / (g * g * g);
    const auto standard = relative_extremes(t1 + t2, std::max(t1.norm(), t2.norm()));
    rep.inverse_negated_max_eigen_rel = std::max(rep.inverse_negated_max_eigen_rel, negated.max_rel);
    rep.inverse_standard_max_eigen_rel =
        std::max(rep.inverse_standard_max_eigen_rel, standard.max_rel);
  }

  rep.monotone = rep.min_gradient > 0.0;
  rep.convex = rep.min_eigen_rel >= -kEigenTolerance;
  rep.concave = rep.max_eigen_rel <= kEigenTolerance;
  rep.inverse_concave_negated = rep.inverse_negated_max_eigen_rel <= kEigenTolerance;
  rep.inverse_concave_standard = rep.inverse_standard_max_eigen_rel <= kEigenTolerance;
  rep.class_certified = rep.declared == CurvatureClass::Convex ? rep.convex : rep.concave;
  return rep;
}

std::optional<double> roundness_ratio(std::span<const double> lambda) {
  const int n = static_cast<int>(lambda.size());
  double h = 0.0, a2 = 0.0;
  for (double v : lambda) {
    h += v;
    a2 += v * v;
  }
  double q1 = 1.0;  // K / H^n, formed factor by factor
  for (double v : lambda) q1 *= v / h;
  const double deficit = std::pow(static_cast<double>(n), -n) - q1;
  if (deficit < 1e-10) return std::nullopt;
  return (n * a2 - h * h) / (h * h) / deficit;
}

long InequalityReport::total_violations() const {
  long total = maclaurin_violations;
  for (const auto& t : specs) total += t.value_violations + t.gradient_violations;
  for (const auto& d : deltas) {
    if (!(d.delta > 0.0)) ++total;
  }
  return total;
}

InequalityReport sample_inequalities(int n, int samples, std::uint64_t seed,
                                      std::span<const double> epsilons) {
  if (n < 2) throw DomainError("inequality sampler requires n >= 2");
  if (samples < 1) throw DomainError("samples must be >= 1");
  static constexpr double kDefaultEps[] = {0.1, 0.2};
  if (epsilons.empty()) epsilons = kDefaultEps;

  InequalityReport rep;
  rep.n = n;
  rep.samples = samples;
  std::vector<CurvatureFunction> funcs;
  for (const auto& spec : registry(n)) {
    funcs.emplace_back(spec, n);
    InequalityTally t;
    t.spec = spec.name();
    t.declared = spec.declared_class();
    rep.specs.push_back(t);
  }

  Rng rng(seed);
  std::vector<double> grad(static_cast<std::size_t>(n));
  std::vector<double> e(static_cast<std::size_t>(n + 1));
  for (int s = 0; s < samples; ++s) {
    const auto x = log_uniform_point(rng, n);
    double h = 0.0;
    for (double v : x) h += v;
    const double mean = h / n;

    for (std::size_t k = 0; k < funcs.size(); ++k) {
      auto& t = rep.specs[k];
      const double f = funcs[k].value_and_gradient(x, grad);
      double gsum = 0.0;
      for (double g : grad) gsum += g;
      // Positive margin means the inequality holds for the declared class.
      const double sign = t.declared == CurvatureClass::Concave ? 1.0 : -1.0;
      const double value_margin = sign * (mean - f) / mean;
      const double grad_margin = sign * (gsum - 1.0);
      ++t.checked;
      if (value_margin < -kInequalityTolerance) ++t.value_violations;
      if (grad_margin < -kInequalityTolerance) ++t.gradient_violations;
      t.worst_value_margin = std::min(t.worst_value_margin, value_margin);
      t.worst_gradient_margin = std::min(t.worst_gradient_margin, grad_margin);
    }

    elementary_symmetric_all(x, e);
    for (int m = 1; m <= n; ++m) {
      const double root = std::pow(e[m] / binomial(n, m), 1.0 / m);
      ++rep.maclaurin_checked;
      if (root > mean * (1.0 + kInequalityTolerance)) ++rep.maclaurin_violations;
    }
  }

  for (double eps : epsilons) {
    DeltaEstimate d;
    d.epsilon = eps;
    d.delta = std::numeric_limits<double>::infinity();
    if (n * eps >= 1.0 - 1e-12) {
      d.vacuous = true;
      rep.deltas.push_back(d);
      continue;
    }
    // Uniform on {lambda_i >= eps, sum lambda = 1}: a shrunken simplex.
    const double span = 1.0 - n * eps;
    std::vector<double> lam(static_cast<std::size_t>(n));
    for (int s = 0; s < samples; ++s) {
      double total = 0.0;
      for (auto& v : lam) total += (v = rng.exponential());
      for (auto& v : lam) v = eps + span * v / total;
      const auto ratio = roundness_ratio(lam);
      if (!ratio) {
        ++d.degenerate;
        continue;
      }
      ++d.nondegenerate;
      if (*ratio < d.delta) {
        d.delta = *ratio;
        d.argmin = lam;
      }
    }
    rep.deltas.push_back(d);
  }
  return rep;
}

}  // namespace mvflow::curvfun
