#pragma once

// Shared numerical kernels: adaptive Gauss-Kronrod quadrature, safeguarded
// monotone root finding, cubic Hermite interpolation, log-domain sums and an
// extended-range positive real for quantities far below the double range.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace hadamard {

/// Raised when an iterative numerical procedure fails (non-convergence,
/// step underflow, bracket failure, NaN).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  int intervals = 0;
  bool converged = false;
};

namespace detail {

// 7-point Gauss / 15-point Kronrod nodes on [-1, 1].
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class F>
std::pair<double, double> gauss_kronrod_15(const F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  for (int i = 0; i < 7; ++i) {
    const double dx = h * kKronrodNodes[i];
    const double s = f(c - dx) + f(c + dx);
    kronrod += kKronrodWeights[i] * s;
    if (i % 2 == 1) gauss += kGaussWeights[i / 2] * s;
  }
  return {kronrod * h, std::abs((kronrod - gauss) * h)};
}

}  // namespace detail

/// Globally adaptive G7-K15 quadrature of f over [a, b]. Subdivides the
/// interval with the largest error estimate until the summed estimate drops
/// below max(abs_tol, rel_tol * |value|).
template <class F>
QuadratureResult integrate(const F& f, double a, double b, double rel_tol = 1e-12,
                           double abs_tol = 0.0, int max_intervals = 2000) {
  QuadratureResult out;
  if (a == b) {
    out.converged = true;
    return out;
  }
  struct Piece {
    double a, b, value, error;
  };
  std::vector<Piece> pieces;
  auto [v0, e0] = detail::gauss_kronrod_15(f, a, b);
  pieces.push_back({a, b, v0, e0});
  double total = v0;
  double total_err = e0;
  while (true) {
    const double target = std::max(abs_tol, rel_tol * std::abs(total));
    if (total_err <= target || !std::isfinite(total)) break;
    if (static_cast<int>(pieces.size()) >= max_intervals) break;
    auto worst = std::max_element(pieces.begin(), pieces.end(),
                                  [](const Piece& x, const Piece& y) { return x.error < y.error; });
    const Piece p = *worst;
    const double mid = 0.5 * (p.a + p.b);
    if (mid <= p.a || mid >= p.b) break;
    auto [vl, el] = detail::gauss_kronrod_15(f, p.a, mid);
    auto [vr, er] = detail::gauss_kronrod_15(f, mid, p.b);
    *worst = {p.a, mid, vl, el};
    pieces.push_back({mid, p.b, vr, er});
    // Re-sum to avoid drift from repeated add/subtract.
    total = 0.0;
    total_err = 0.0;
    for (const auto& q : pieces) {
      total += q.value;
      total_err += q.error;
    }
  }
  out.value = total;
  out.error = total_err;
  out.intervals = static_cast<int>(pieces.size());
  out.converged = std::isfinite(total) &&
                  total_err <= std::max(abs_tol, rel_tol * std::abs(total)) * 1.0000001;
  return out;
}

/// Integrates over consecutive breakpoints; throws NumericalError if any
/// segment fails to converge.
template <class F>
double integrate_segments(const F& f, const std::vector<double>& breaks, double rel_tol = 1e-12,
                          double abs_tol = 0.0) {
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (breaks[i + 1] <= breaks[i]) continue;
    auto r = integrate(f, breaks[i], breaks[i + 1], rel_tol, abs_tol);
    if (!r.converged) {
      // Accept a segment whose absolute error is negligible against the sum.
      if (!(std::isfinite(r.value) && r.error <= 10.0 * rel_tol * std::abs(sum + r.value) + abs_tol))
        throw NumericalError("quadrature did not converge on [" + std::to_string(breaks[i]) + ", " +
                             std::to_string(breaks[i + 1]) + "]");
    }
    sum += r.value;
  }
  return sum;
}

/// Root of an increasing function g on [lo, hi] with g(lo) <= 0 <= g(hi).
/// Newton steps from `dg` when available, bisection otherwise.
inline double solve_increasing(const std::function<double(double)>& g, double lo, double hi,
                               const std::function<double(double)>& dg = {},
                               double x_tol = 1e-15, int max_iter = 200) {
  double glo = g(lo);
  double ghi = g(hi);
  if (glo > 0.0 || ghi < 0.0 || !std::isfinite(glo) || !std::isfinite(ghi))
    throw NumericalError("solve_increasing: root not bracketed");
  if (glo == 0.0) return lo;
  if (ghi == 0.0) return hi;
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < max_iter; ++it) {
    const double gx = g(x);
    if (gx == 0.0) return x;
    if (gx < 0.0)
      lo = x;
    else
      hi = x;
    double next = 0.5 * (lo + hi);
    if (dg) {
      const double d = dg(x);
      if (d > 0.0 && std::isfinite(d)) {
        const double nx = x - gx / d;
        if (nx > lo && nx < hi) next = nx;
      }
    }
    if (std::abs(next - x) <= x_tol * std::max(1.0, std::abs(x)) || hi - lo <= x_tol * std::max(1.0, std::abs(x)))
      return next;
    x = next;
  }
  return x;
}

/// Cubic Hermite interpolation on [x0, x1] from values and slopes.
inline double hermite(double x, double x0, double x1, double y0, double y1, double d0, double d1) {
  const double h = x1 - x0;
  const double s = (x - x0) / h;
  const double s2 = s * s;
  const double s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * d0 + (-2 * s3 + 3 * s2) * y1 +
         (s3 - s2) * h * d1;
}

/// Derivative of the cubic Hermite interpolant.
inline double hermite_slope(double x, double x0, double x1, double y0, double y1, double d0, double d1) {
  const double h = x1 - x0;
  const double s = (x - x0) / h;
  const double s2 = s * s;
  return ((6 * s2 - 6 * s) * y0 + (-6 * s2 + 6 * s) * y1) / h + (3 * s2 - 4 * s + 1) * d0 +
         (3 * s2 - 2 * s) * d1;
}

/// Running log-sum-exp accumulator. Holds log(sum of added terms); an empty
/// or all-zero sum is -inf.
class LogSum {
 public:
  void add_log(double log_term) {
    if (log_term == -kInf) return;
    if (log_ == -kInf) {
      log_ = log_term;
      return;
    }
    if (log_term > log_) std::swap(log_term, log_);
    log_ += std::log1p(std::exp(log_term - log_));
  }
  void add(const LogSum& other) { add_log(other.log_); }
  double log() const { return log_; }
  double value() const { return std::exp(log_); }

 private:
  double log_ = -kInf;
};

/// Positive real stored as exp(D - e^X). X = -inf gives an ordinary number
/// exp(D); finite large X reaches values like exp(-exp(1e14)) whose logarithm
/// is itself outside the double range. D carries the relative precision.
struct Extended {
  double X = -kInf;
  double D = -kInf;

  static Extended from_double(double v) {
    if (v < 0.0) throw std::domain_error("Extended: negative value");
    return {-kInf, v == 0.0 ? -kInf : std::log(v)};
  }
  /// exp(-exp(x)).
  static Extended doubly_small(double x, double d = 0.0) { return {x, d}; }

  bool is_zero() const { return D == -kInf || X == kInf; }
  /// Natural log of the value (may be -inf when it leaves the double range).
  double log_value() const {
    if (is_zero()) return -kInf;
    if (X == -kInf) return D;
    return D - std::exp(X);
  }
  double value() const { return std::exp(log_value()); }
  /// log(-log value) for values below one. Only meaningful when the value is < 1.
  double log_neg_log() const {
    if (is_zero()) return kInf;
    if (X == -kInf) return std::log(-D);
    if (X > 700.0) return X + std::log1p(-D * std::exp(-X));
    return std::log(std::exp(X) - D);
  }
  /// -log(value); +inf when not representable.
  double neg_log() const { return -log_value(); }

  Extended scaled(double log_factor) const { return {X, D + log_factor}; }
  /// value^p for p > 0.
  Extended power(double p) const {
    if (is_zero()) return {};
    return {X == -kInf ? -kInf : X + std::log(p), p * D};
  }
  /// The same value written with doubly-exponential part X_ref <= X.
  Extended rebased(double X_ref) const {
    if (is_zero() || X_ref == X) return *this;
    const double shift = X_ref == -kInf ? std::exp(X) : std::exp(X_ref) * std::expm1(X - X_ref);
    return {X_ref, D - shift};
  }
};

/// log(a / b); +-inf when one side is zero.
inline double log_ratio(const Extended& a, const Extended& b) {
  if (a.is_zero()) return b.is_zero() ? kNaN : -kInf;
  if (b.is_zero()) return kInf;
  if (a.X == b.X) return a.D - b.D;
  if (a.X < b.X) return a.D - b.rebased(a.X).D;
  return a.rebased(b.X).D - b.D;
}

/// Sum of extended values; terms are rebased to the smallest X seen.
class ExtendedSum {
 public:
  void add(const Extended& e) {
    if (e.is_zero()) return;
    if (total_.is_zero()) {
      total_ = e;
      return;
    }
    const double X = std::min(total_.X, e.X);
    const double a = total_.rebased(X).D;
    const double b = e.rebased(X).D;
    const double hi = std::max(a, b);
    const double lo = std::min(a, b);
    total_ = {X, lo == -kInf ? hi : hi + std::log1p(std::exp(lo - hi))};
  }
  const Extended& total() const { return total_; }

 private:
  Extended total_;
};

/// Relative difference a/b - 1 of two extended values sharing (approximately)
/// the same doubly-exponential part; computed from the D components when the
/// X parts agree so that no precision is lost to the huge exponent.
inline double relative_difference(const Extended& a, const Extended& b) {
  if (a.is_zero() && b.is_zero()) return 0.0;
  if (a.X == b.X) return std::expm1(a.D - b.D);
  const double la = a.log_value();
  const double lb = b.log_value();
  if (std::isfinite(la) && std::isfinite(lb)) return std::expm1(la - lb);
  return kNaN;
}

/// Decimal text for a double with 17 significant digits.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Geometric grid lo * ratio^k covering [lo, hi] with `per_decade` points per decade.
inline std::vector<double> geometric_grid(double lo, double hi, int per_decade) {
  std::vector<double> out;
  const int count = static_cast<int>(std::ceil(std::log10(hi / lo) * per_decade));
  out.reserve(count + 1);
  for (int k = 0; k <= count; ++k) out.push_back(lo * std::pow(10.0, static_cast<double>(k) / per_decade));
  out.back() = hi;
  return out;
}

}  // namespace hadamard
