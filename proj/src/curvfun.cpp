#include "mvflow/curvfun.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mvflow::curvfun {

namespace {

constexpr int kMaxDimension = 32;
using Scratch = std::array<double, kMaxDimension + 3>;

std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

int parse_int(std::string_view s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw DomainError("bad integer parameter '" + std::string(s) + "'");
  }
  return v;
}

double parse_double(std::string_view s) {
  try {
    std::size_t used = 0;
    const std::string str(s);
    const double v = std::stod(str, &used);
    if (used != str.size()) throw DomainError("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw DomainError("bad real parameter '" + std::string(s) + "'");
  }
}

std::vector<std::string_view> split_args(std::string_view inner) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= inner.size()) {
    const auto comma = inner.find(',', start);
    auto piece = inner.substr(start, comma == std::string_view::npos ? inner.npos : comma - start);
    while (!piece.empty() && piece.front() == ' ') piece.remove_prefix(1);
    while (!piece.empty() && piece.back() == ' ') piece.remove_suffix(1);
    out.push_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// Derivatives of g^{1/p} / G^{1/p} from those of a homogeneous g of degree p.
struct RootInput {
  double g;
  double p;
  double norm;  // g at (1,...,1)
};

double root_value(const RootInput& in) { return std::pow(in.g / in.norm, 1.0 / in.p); }

}  // namespace

// ---------------------------------------------------------------------------

LambdaVector::LambdaVector(std::vector<double> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw DomainError("LambdaVector must be non-empty");
  if (static_cast<int>(entries_.size()) > kMaxDimension) {
    throw DomainError("dimension exceeds " + std::to_string(kMaxDimension));
  }
  std::sort(entries_.begin(), entries_.end());
  check_cone(entries_);
}

void check_cone(std::span<const double> lambda) {
  double hi = 0.0;
  for (double v : lambda) {
    if (!std::isfinite(v)) throw ConeViolation("non-finite principal curvature");
    hi = std::max(hi, v);
  }
  for (double v : lambda) {
    if (!(v > kConeTolerance * hi) || hi <= 0.0) {
      throw ConeViolation("principal curvature " + format_number(v) +
                          " outside the positive cone");
    }
  }
}

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double out = 1.0;
  for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
  return std::round(out);
}

// ---------------------------------------------------------------------------
// CurvatureSpec

CurvatureSpec CurvatureSpec::parse(std::string_view text) {
  const auto open = text.find('(');
  const auto head = text.substr(0, open);
  std::vector<std::string_view> args;
  if (open != std::string_view::npos) {
    if (text.back() != ')') throw DomainError("unterminated spec '" + std::string(text) + "'");
    args = split_args(text.substr(open + 1, text.size() - open - 2));
  }
  auto expect = [&](std::size_t count) {
    if (args.size() != count) {
      throw DomainError("spec '" + std::string(text) + "' expects " + std::to_string(count) +
                        " parameter(s)");
    }
  };
  if (head == "MeanH") {
    expect(0);
    return mean_h();
  }
  if (head == "NormOfA") {
    expect(0);
    return norm_of_a();
  }
  if (head == "GammaK") {
    expect(1);
    return gamma_k(parse_int(args[0]));
  }
  if (head == "QuotientEml") {
    expect(2);
    return quotient(parse_int(args[0]), parse_int(args[1]));
  }
  if (head == "PowerMean") {
    expect(1);
    return power_mean(parse_double(args[0]));
  }
  throw DomainError("unknown curvature family '" + std::string(head) + "'");
}

std::string CurvatureSpec::name() const {
  switch (family) {
    case Family::MeanH: return "MeanH";
    case Family::NormOfA: return "NormOfA";
    case Family::GammaK: return "GammaK(" + std::to_string(k) + ")";
    case Family::QuotientEml:
      return "QuotientEml(" + std::to_string(m) + "," + std::to_string(l) + ")";
    case Family::PowerMean: return "PowerMean(" + format_number(r) + ")";
  }
  return "?";
}

CurvatureClass CurvatureSpec::declared_class() const {
  switch (family) {
    case Family::MeanH:
    case Family::NormOfA:
    case Family::GammaK: return CurvatureClass::Convex;
    case Family::QuotientEml:
    case Family::PowerMean: return CurvatureClass::Concave;
  }
  return CurvatureClass::Convex;
}

void CurvatureSpec::validate(int n) const {
  if (n < 1 || n > kMaxDimension) {
    throw DomainError("dimension " + std::to_string(n) + " unsupported");
  }
  switch (family) {
    case Family::MeanH:
    case Family::NormOfA: return;
    case Family::GammaK:
      if (k < 1 || k > n) throw DomainError("GammaK requires 1 <= k <= n");
      return;
    case Family::QuotientEml:
      if (!(n >= m && m > l && l >= 0)) {
        throw DomainError("QuotientEml requires n >= m > l >= 0");
      }
      return;
    case Family::PowerMean:
      if (!std::isfinite(r) || std::abs(r) > 1.0) {
        throw DomainError("PowerMean requires |r| <= 1");
      }
      return;
  }
}

double CurvatureSpec::normalization(int n) const {
  validate(n);
  switch (family) {
    case Family::MeanH: return n;
    case Family::NormOfA: return std::sqrt(static_cast<double>(n));
    case Family::GammaK: return std::pow(binomial(n + k - 1, k), 1.0 / k);
    case Family::QuotientEml: return std::pow(binomial(n, m) / binomial(n, l), 1.0 / (m - l));
    case Family::PowerMean: return r == 0.0 ? 1.0 : std::pow(static_cast<double>(n), 1.0 / r);
  }
  return 1.0;
}

std::vector<CurvatureSpec> registry(int n) {
  std::vector<CurvatureSpec> out{CurvatureSpec::mean_h(), CurvatureSpec::norm_of_a()};
  for (int k = 2; k <= std::min(n, 3); ++k) out.push_back(CurvatureSpec::gamma_k(k));
  out.push_back(CurvatureSpec::quotient(n, 0));
  out.push_back(CurvatureSpec::quotient(n, n - 1));
  if (n > 2) {
    out.push_back(CurvatureSpec::quotient(2, 0));
    out.push_back(CurvatureSpec::quotient(2, 1));
  }
  out.push_back(CurvatureSpec::power_mean(-1.0));
  out.push_back(CurvatureSpec::power_mean(0.5));
  return out;
}

// ---------------------------------------------------------------------------
// Symmetric polynomials

void elementary_symmetric_all(std::span<const double> x, std::span<double> out) {
  const auto n = x.size();
  if (out.size() != n + 1) throw DomainError("output must hold n+1 coefficients");
  std::fill(out.begin(), out.end(), 0.0);
  out[0] = 1.0;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t d = j + 1; d >= 1; --d) out[d] += x[j] * out[d - 1];
  }
}

double elementary_symmetric_without(int m, std::span<const double> x, int skip_a, int skip_b) {
  if (m < 0) return 0.0;
  if (m == 0) return 1.0;
  Scratch e{};
  e[0] = 1.0;
  int used = 0;
  for (int j = 0; j < static_cast<int>(x.size()); ++j) {
    if (j == skip_a || j == skip_b) continue;
    ++used;
    for (int d = std::min(used, m); d >= 1; --d) e[d] += x[j] * e[d - 1];
  }
  return used >= m ? e[m] : 0.0;
}

double complete_symmetric(int k, std::span<const double> x, std::span<const double> extra) {
  if (k < 0) return 0.0;
  Scratch h{};
  h[0] = 1.0;
  auto absorb = [&](double v) {
    for (int d = 1; d <= k; ++d) h[d] += v * h[d - 1];
  };
  for (double v : x) absorb(v);
  for (double v : extra) absorb(v);
  return h[k];
}

double elementary_symmetric(int m, const LambdaVector& lambda) {
  if (m < 0 || m > lambda.size()) throw DomainError("index m out of range 0..n");
  return elementary_symmetric_without(m, lambda.entries(), -1);
}

std::vector<double> elementary_symmetric_gradient(int m, const LambdaVector& lambda) {
  const int n = lambda.size();
  if (m < 1 || m > n) throw DomainError("gradient index m out of range 1..n");
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    out[i] = elementary_symmetric_without(m - 1, lambda.entries(), i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CurvatureFunction

CurvatureFunction::CurvatureFunction(CurvatureSpec spec, int n) : spec_(spec), n_(n) {
  spec_.validate(n);
  std::vector<double> ones(static_cast<std::size_t>(n), 1.0);
  switch (spec_.family) {
    case Family::MeanH: norm_ = n; break;
    case Family::NormOfA: norm_ = n; break;  // of sum lambda^2
    case Family::GammaK: norm_ = complete_symmetric(spec_.k, ones); break;
    case Family::QuotientEml:
      norm_ = elementary_symmetric_without(spec_.m, ones, -1) /
              elementary_symmetric_without(spec_.l, ones, -1);
      break;
    case Family::PowerMean: norm_ = n; break;
  }
}

double CurvatureFunction::value(std::span<const double> x) const {
  switch (spec_.family) {
    case Family::MeanH:
      return std::accumulate(x.begin(), x.end(), 0.0) / norm_;
    case Family::NormOfA: {
      double s = 0.0;
      for (double v : x) s += v * v;
      return std::sqrt(s / norm_);
    }
    case Family::GammaK:
      return root_value({complete_symmetric(spec_.k, x), double(spec_.k), norm_});
    case Family::QuotientEml: {
      const double em = elementary_symmetric_without(spec_.m, x, -1);
      const double el = elementary_symmetric_without(spec_.l, x, -1);
      return root_value({em / el, double(spec_.m - spec_.l), norm_});
    }
    case Family::PowerMean: {
      if (spec_.r == 0.0) {
        double s = 0.0;
        for (double v : x) s += std::log(v);
        return std::exp(s / n_);
      }
      if (spec_.r == 1.0) return std::accumulate(x.begin(), x.end(), 0.0) / n_;
      double s = 0.0;
      for (double v : x) s += std::pow(v, spec_.r);
      return root_value({s, spec_.r, norm_});
    }
  }
  return 0.0;
}

double CurvatureFunction::value_and_gradient(std::span<const double> x,
                                             std::span<double> grad) const {
  const int n = n_;
  switch (spec_.family) {
    case Family::MeanH: {
      std::fill(grad.begin(), grad.end(), 1.0 / n);
      return value(x);
    }
    case Family::NormOfA: {
      const double f = value(x);
      for (int i = 0; i < n; ++i) grad[i] = x[i] / (n * f);
      return f;
    }
    case Family::GammaK: {
      const int k = spec_.k;
      const double g = complete_symmetric(k, x);
      const double f = root_value({g, double(k), norm_});
      for (int i = 0; i < n; ++i) {
        const double xi[1] = {x[i]};
        grad[i] = f / (k * g) * complete_symmetric(k - 1, x, xi);
      }
      return f;
    }
    case Family::QuotientEml: {
      const int m = spec_.m, l = spec_.l;
      const double em = elementary_symmetric_without(m, x, -1);
      const double el = elementary_symmetric_without(l, x, -1);
      const double f = root_value({em / el, double(m - l), norm_});
      for (int i = 0; i < n; ++i) {
        const double a = elementary_symmetric_without(m - 1, x, i) / em;
        const double b = l > 0 ? elementary_symmetric_without(l - 1, x, i) / el : 0.0;
        grad[i] = f / (m - l) * (a - b);
      }
      return f;
    }
    case Family::PowerMean: {
      const double r = spec_.r;
      const double f = value(x);
      if (r == 0.0) {
        for (int i = 0; i < n; ++i) grad[i] = f / (n * x[i]);
        return f;
      }
      double s = 0.0;
      for (double v : x) s += std::pow(v, r);
      for (int i = 0; i < n; ++i) grad[i] = f * std::pow(x[i], r - 1.0) / s;
      return f;
    }
  }
  return 0.0;
}

DerivativeBundle CurvatureFunction::bundle(std::span<const double> x) const {
  const int n = n_;
  DerivativeBundle b;
  b.gradient.assign(static_cast<std::size_t>(n), 0.0);
  b.hessian.assign(static_cast<std::size_t>(n * n), 0.0);
  b.value = value_and_gradient(x, b.gradient);
  const double f = b.value;
  auto H = [&](int i, int j) -> double& { return b.hessian[static_cast<std::size_t>(i * n + j)]; };

  switch (spec_.family) {
    case Family::MeanH: break;
    case Family::NormOfA:
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          H(i, j) = (i == j ? 1.0 / (n * f) : 0.0) - x[i] * x[j] / (double(n) * n * f * f * f);
        }
      }
      break;
    case Family::GammaK: {
      // g_ij = h_{k-2}(x, x_i, x_j), doubled on the diagonal.
      const int k = spec_.k;
      const double g = complete_symmetric(k, x);
      std::vector<double> gi(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        const double xi[1] = {x[i]};
        gi[i] = complete_symmetric(k - 1, x, xi);
      }
      const double p = k;
      for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
          const double xij[2] = {x[i], x[j]};
          const double gij = (i == j ? 2.0 : 1.0) * complete_symmetric(k - 2, x, xij);
          H(i, j) = H(j, i) = f / (p * g) * (gij + (1.0 / p - 1.0) * gi[i] * gi[j] / g);
        }
      }
      break;
    }
    case Family::QuotientEml: {
      // log f = (log E_m - log E_l) / q, so
      // f_ij = f_i f_j / f + f/q (E_m,ij/E_m - a_i a_j - E_l,ij/E_l + b_i b_j).
      const int m = spec_.m, l = spec_.l;
      const double q = m - l;
      const double em = elementary_symmetric_without(m, x, -1);
      const double el = elementary_symmetric_without(l, x, -1);
      std::vector<double> a(static_cast<std::size_t>(n)), bb(static_cast<std::size_t>(n), 0.0);
      for (int i = 0; i < n; ++i) {
        a[i] = elementary_symmetric_without(m - 1, x, i) / em;
        if (l > 0) bb[i] = elementary_symmetric_without(l - 1, x, i) / el;
      }
      for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
          double t = -a[i] * a[j] + bb[i] * bb[j];
          if (i != j) {
            t += elementary_symmetric_without(m - 2, x, i, j) / em;
            if (l > 0) t -= elementary_symmetric_without(l - 2, x, i, j) / el;
          }
          H(i, j) = H(j, i) = b.gradient[i] * b.gradient[j] / f + f / q * t;
        }
      }
      break;
    }
    case Family::PowerMean: {
      const double r = spec_.r;
      if (r == 0.0) {
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            H(i, j) = b.gradient[i] * b.gradient[j] / f - (i == j ? f / (n * x[i] * x[i]) : 0.0);
          }
        }
        break;
      }
      if (r == 1.0) break;
      double s = 0.0;
      for (double v : x) s += std::pow(v, r);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          const double pij = std::pow(x[i], r - 1.0) * std::pow(x[j], r - 1.0);
          H(i, j) = f * (1.0 - r) * pij / (s * s) +
                    (i == j ? f * (r - 1.0) * std::pow(x[i], r - 2.0) / s : 0.0);
        }
      }
      break;
    }
  }
  return b;
}

DerivativeBundle eval(const CurvatureSpec& spec, const LambdaVector& lambda) {
  return CurvatureFunction(spec, lambda.size()).bundle(lambda.entries());
}

DerivativeBundle power_bundle(const DerivativeBundle& f, double beta) {
  if (!(beta >= 1.0)) throw DomainError("beta must satisfy beta >= 1");
  const int n = f.size();
  DerivativeBundle out;
  out.value = std::pow(f.value, beta);
  const double d1 = beta * std::pow(f.value, beta - 1.0);
  const double d2 = beta * (beta - 1.0) * std::pow(f.value, beta - 2.0);
  out.gradient.resize(f.gradient.size());
  out.hessian.resize(f.hessian.size());
  for (int i = 0; i < n; ++i) out.gradient[i] = d1 * f.gradient[i];
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      out.hessian[i * n + j] = d1 * f.hess(i, j) + d2 * f.gradient[i] * f.gradient[j];
    }
  }
  return out;
}

DerivativeBundle eval_phi(const CurvatureSpec& spec, double beta, const LambdaVector& lambda) {
  if (!(beta >= 1.0)) throw DomainError("beta must satisfy beta >= 1");
  return power_bundle(eval(spec, lambda), beta);
}

}  // namespace mvflow::curvfun
