#pragma once

// Rotationally symmetric Cartan-Hadamard models dr^2 + f(r)^2 dsigma^2.
// The warping function f is the Jacobi field solving f'' + k f = 0,
// f(0) = 0, f'(0) = 1, for a nonpositive radial curvature k.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hadamard/numerics.hpp"

namespace hadamard {

enum class BridgeKind { none, c1_cubic };

class CurvatureProfile {
 public:
  struct Euclidean {};
  struct Constant {
    double a;  // k = -a^2
  };
  struct Power {
    double phi;
    double r0;
    BridgeKind bridge;
    double delta;
  };
  struct Custom {
    std::vector<double> r;
    std::vector<double> k;
  };
  using Kind = std::variant<Euclidean, Constant, Power, Custom>;

  static CurvatureProfile euclidean() { return CurvatureProfile(Euclidean{}); }

  static CurvatureProfile constant(double a) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw std::invalid_argument("constant profile needs a >= 0");
    return CurvatureProfile(Constant{a});
  }

  /// k = -phi (phi - 1) / r^2 for r >= r0 and k = 0 near the pole; the
  /// c1_cubic bridge interpolates on [r0 - delta, r0].
  static CurvatureProfile power(double phi, double r0, BridgeKind bridge = BridgeKind::none,
                                double delta = 0.0) {
    if (!(phi > 1.0)) throw std::invalid_argument("power profile needs phi > 1");
    if (!(r0 > 0.0)) throw std::invalid_argument("power profile needs R0 > 0");
    if (bridge == BridgeKind::c1_cubic && !(delta > 0.0 && delta < r0))
      throw std::invalid_argument("c1_cubic bridge needs 0 < delta < R0");
    return CurvatureProfile(Power{phi, r0, bridge, bridge == BridgeKind::none ? 0.0 : delta});
  }

  /// Sample table with strictly increasing r >= 0 and k <= 0; linear in
  /// between, constant beyond either end.
  static CurvatureProfile custom(std::vector<double> r, std::vector<double> k) {
    if (r.size() != k.size() || r.empty()) throw std::invalid_argument("custom profile: mismatched or empty table");
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (!(r[i] >= 0.0)) throw std::invalid_argument("custom profile: r must be >= 0");
      if (i > 0 && !(r[i] > r[i - 1])) throw std::invalid_argument("custom profile: r must be strictly increasing");
      if (!(k[i] <= 0.0)) throw std::invalid_argument("custom profile: k must be <= 0");
    }
    return CurvatureProfile(Custom{std::move(r), std::move(k)});
  }

  /// Two-column CSV `r,k` with a header line.
  static CurvatureProfile from_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("custom profile CSV: missing header");
    std::vector<double> r, k;
    int lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream row(line);
      double a = kNaN, b = kNaN;
      if (!(row >> a >> b)) throw std::invalid_argument("custom profile CSV: bad row " + std::to_string(lineno));
      r.push_back(a);
      k.push_back(b);
    }
    return custom(std::move(r), std::move(k));
  }

  static CurvatureProfile load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open curvature table " + path);
    return from_csv(in);
  }

  const Kind& kind() const { return kind_; }

  /// Curvature k(r) of every radial 2-plane.
  double operator()(double r) const {
    return std::visit([r](const auto& p) { return eval(p, r); }, kind_);
  }

  /// Radii where k or k' is not smooth; the ODE integrator steps onto them.
  std::vector<double> breakpoints() const {
    std::vector<double> out;
    if (auto p = std::get_if<Power>(&kind_)) {
      if (p->bridge == BridgeKind::c1_cubic) out.push_back(p->r0 - p->delta);
      out.push_back(p->r0);
    } else if (auto c = std::get_if<Custom>(&kind_)) {
      for (double x : c->r)
        if (x > 0.0) out.push_back(x);
    }
    return out;
  }

  std::string name() const {
    struct V {
      std::string operator()(const Euclidean&) const { return "euclidean"; }
      std::string operator()(const Constant&) const { return "constant"; }
      std::string operator()(const Power&) const { return "power"; }
      std::string operator()(const Custom&) const { return "custom"; }
    };
    return std::visit(V{}, kind_);
  }

 private:
  explicit CurvatureProfile(Kind k) : kind_(std::move(k)) {}

  static double eval(const Euclidean&, double) { return 0.0; }
  static double eval(const Constant& c, double) { return -c.a * c.a; }
  static double eval(const Power& p, double r) {
    const double c = p.phi * (p.phi - 1.0);
    if (r >= p.r0) return -c / (r * r);
    if (p.bridge == BridgeKind::none || r <= p.r0 - p.delta) return 0.0;
    // Hermite cubic from (r0 - delta, 0, slope 0) to (r0, k(r0), k'(r0)).
    // Both nonzero terms are <= 0 on the interval, so the bridge stays nonpositive.
    const double k0 = -c / (p.r0 * p.r0);
    const double dk0 = 2.0 * c / (p.r0 * p.r0 * p.r0);
    return hermite(r, p.r0 - p.delta, p.r0, 0.0, k0, 0.0, dk0);
  }
  static double eval(const Custom& c, double r) {
    if (r <= c.r.front()) return c.k.front();
    if (r >= c.r.back()) return c.k.back();
    auto it = std::upper_bound(c.r.begin(), c.r.end(), r);
    const std::size_t i = static_cast<std::size_t>(it - c.r.begin());
    const double t = (r - c.r[i - 1]) / (c.r[i] - c.r[i - 1]);
    return c.k[i - 1] + t * (c.k[i] - c.k[i - 1]);
  }

  Kind kind_;
};

inline double eval_curvature(const CurvatureProfile& profile, double r) {
  if (!(r >= 0.0)) throw std::domain_error("eval_curvature: r must be >= 0");
  return profile(r);
}

/// Dense solution (r, f, f') of the Jacobi IVP on [0, r_max].
class JacobiSolution {
 public:
  JacobiSolution(CurvatureProfile profile, int n, std::vector<double> r, std::vector<double> f,
                 std::vector<double> fp, std::vector<double> fpp_right, std::vector<double> fpp_left)
      : profile_(std::move(profile)),
        n_(n),
        r_(std::move(r)),
        f_(std::move(f)),
        fp_(std::move(fp)),
        fpp_right_(std::move(fpp_right)),
        fpp_left_(std::move(fpp_left)) {}

  const CurvatureProfile& profile() const { return profile_; }
  int dimension() const { return n_; }
  double r_max() const { return r_.back(); }
  const std::vector<double>& radii() const { return r_; }
  const std::vector<double>& f_values() const { return f_; }
  const std::vector<double>& fprime_values() const { return fp_; }

  /// f(r) by cubic Hermite interpolation with the exact nodal slopes f'.
  double f(double r) const {
    const std::size_t i = locate(r);
    return hermite(r, r_[i], r_[i + 1], f_[i], f_[i + 1], fp_[i], fp_[i + 1]);
  }

  /// f'(r); slopes come from the ODE, f'' = -k f (one-sided at breakpoints).
  double fprime(double r) const {
    const std::size_t i = locate(r);
    return hermite(r, r_[i], r_[i + 1], fp_[i], fp_[i + 1], fpp_right_[i], fpp_left_[i]);
  }

  /// Volume density f^{n-1} of geodesic polar coordinates.
  double polar_jacobian(double r) const { return std::pow(f(r), n_ - 1); }

 private:
  std::size_t locate(double r) const {
    if (!(r >= 0.0) || r > r_.back() * (1.0 + 1e-12))
      throw std::domain_error("JacobiSolution: radius " + std::to_string(r) + " outside [0, r_max]");
    auto it = std::upper_bound(r_.begin(), r_.end(), r);
    std::size_t i = it == r_.begin() ? 0 : static_cast<std::size_t>(it - r_.begin()) - 1;
    return std::min(i, r_.size() - 2);
  }

  CurvatureProfile profile_;
  int n_;
  std::vector<double> r_, f_, fp_;
  // Per interval i: f'' at the right of r_i and at the left of r_{i+1}.
  std::vector<double> fpp_right_, fpp_left_;
};

/// Integrates f'' = -k f with an adaptive Dormand-Prince 5(4) pair. The first
/// step off the pole uses the series f = r - k(0) r^3 / 6 + k(0)^2 r^5 / 120.
inline JacobiSolution solve_jacobi(const CurvatureProfile& profile, int n, double r_max, double tol = 1e-12) {
  if (!(r_max > 0.0)) throw std::invalid_argument("solve_jacobi: r_max must be positive");
  if (!(tol > 0.0)) throw std::invalid_argument("solve_jacobi: tol must be positive");
  if (n < 2) throw std::invalid_argument("solve_jacobi: dimension must be >= 2");

  const double k0 = profile(0.0);
  if (!std::isfinite(k0)) throw NumericalError("solve_jacobi: curvature is not finite at the pole");

  std::vector<double> rs{0.0}, fs{0.0}, fps{1.0};
  const double r_start = std::min({1e-4 / std::max(1.0, std::sqrt(-k0)), r_max * 1e-3, 1e-4});
  {
    const double r = r_start;
    fs.push_back(r - k0 * r * r * r / 6.0 + k0 * k0 * std::pow(r, 5) / 120.0);
    fps.push_back(1.0 - k0 * r * r / 2.0 + k0 * k0 * std::pow(r, 4) / 24.0);
    rs.push_back(r);
  }

  std::vector<double> stops = profile.breakpoints();
  stops.push_back(r_max);
  std::sort(stops.begin(), stops.end());
  stops.erase(std::remove_if(stops.begin(), stops.end(), [&](double s) { return s <= r_start || s > r_max; }),
              stops.end());

  // Dormand-Prince coefficients.
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                   a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                   e6 = 22.0 / 525, e7 = -1.0 / 40;

  double r = rs.back();
  double y0 = fs.back(), y1 = fps.back();
  double h = std::min(1e-3, r_max - r);
  std::size_t stop_idx = 0;
  // The segment end is approached from the left, so curvature samples are
  // taken at r - 0 there; k may jump at a breakpoint.
  auto k_at = [&](double x, double seg_end) {
    if (x >= seg_end) x = std::nextafter(seg_end, 0.0);
    return profile(x);
  };

  while (stop_idx < stops.size()) {
    const double seg_end = stops[stop_idx];
    if (r >= seg_end) {
      ++stop_idx;
      continue;
    }
    const double h_cap = 0.02 * std::max(1.0, r);
    h = std::min({h, h_cap, seg_end - r});
    if (h < 1e-14 * std::max(1.0, r)) throw NumericalError("solve_jacobi: step size underflow at r = " + std::to_string(r));

    auto rhs = [&](double x, double f, double fp, double& df, double& dfp) {
      df = fp;
      dfp = -k_at(x, seg_end) * f;
    };
    double k1f, k1p, k2f, k2p, k3f, k3p, k4f, k4p, k5f, k5p, k6f, k6p, k7f, k7p;
    rhs(r, y0, y1, k1f, k1p);
    rhs(r + c2 * h, y0 + h * a21 * k1f, y1 + h * a21 * k1p, k2f, k2p);
    rhs(r + c3 * h, y0 + h * (a31 * k1f + a32 * k2f), y1 + h * (a31 * k1p + a32 * k2p), k3f, k3p);
    rhs(r + c4 * h, y0 + h * (a41 * k1f + a42 * k2f + a43 * k3f), y1 + h * (a41 * k1p + a42 * k2p + a43 * k3p), k4f,
        k4p);
    rhs(r + c5 * h, y0 + h * (a51 * k1f + a52 * k2f + a53 * k3f + a54 * k4f),
        y1 + h * (a51 * k1p + a52 * k2p + a53 * k3p + a54 * k4p), k5f, k5p);
    rhs(r + h, y0 + h * (a61 * k1f + a62 * k2f + a63 * k3f + a64 * k4f + a65 * k5f),
        y1 + h * (a61 * k1p + a62 * k2p + a63 * k3p + a64 * k4p + a65 * k5p), k6f, k6p);
    const double nf = y0 + h * (b1 * k1f + b3 * k3f + b4 * k4f + b5 * k5f + b6 * k6f);
    const double np = y1 + h * (b1 * k1p + b3 * k3p + b4 * k4p + b5 * k5p + b6 * k6p);
    rhs(r + h, nf, np, k7f, k7p);
    const double ef = h * (e1 * k1f + e3 * k3f + e4 * k4f + e5 * k5f + e6 * k6f + e7 * k7f);
    const double ep = h * (e1 * k1p + e3 * k3p + e4 * k4p + e5 * k5p + e6 * k6p + e7 * k7p);
    if (!std::isfinite(nf) || !std::isfinite(np) || !std::isfinite(ef) || !std::isfinite(ep)) {
      h *= 0.25;
      continue;
    }
    const double sf = tol * std::max({std::abs(y0), std::abs(nf), 1e-300});
    const double sp = tol * std::max({std::abs(y1), std::abs(np), 1e-300});
    const double err = std::max(std::abs(ef) / sf, std::abs(ep) / sp);
    if (err <= 1.0) {
      r = (seg_end - (r + h) <= 1e-14 * std::max(1.0, seg_end)) ? seg_end : r + h;
      y0 = nf;
      y1 = np;
      rs.push_back(r);
      fs.push_back(y0);
      fps.push_back(y1);
    }
    const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    h *= factor;
  }

  // One-sided second derivatives per interval.
  const std::size_t m = rs.size();
  std::vector<double> right(m - 1), left(m - 1);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    const double a = rs[i], b = rs[i + 1];
    const double eps_a = std::max(1e-300, std::abs(a) * 1e-13);
    const double eps_b = std::max(1e-300, std::abs(b) * 1e-13);
    right[i] = -profile(std::min(a + eps_a, 0.5 * (a + b))) * fs[i];
    left[i] = -profile(std::max(b - eps_b, 0.5 * (a + b))) * fs[i + 1];
  }
  return JacobiSolution(profile, n, std::move(rs), std::move(fs), std::move(fps), std::move(right), std::move(left));
}

/// Laplacian of the distance function: (n - 1) f'(r) / f(r).
inline double laplacian_r(const JacobiSolution& jac, double r) {
  if (!(r > 0.0)) throw std::domain_error("laplacian_r: distance function is singular at the pole");
  if (r > jac.r_max() * (1.0 + 1e-12)) throw std::domain_error("laplacian_r: radius beyond r_max");
  return (jac.dimension() - 1) * jac.fprime(r) / jac.f(r);
}

struct LaplacianBound {
  double R1 = kInf;            ///< +inf when the bound is not reached within r_max
  bool base_bound_holds = true;  ///< r * Delta r >= n - 1 on every grid node
  double min_base_margin = kInf;  ///< min over nodes of r * Delta r - (n - 1)
  double threshold = 0.0;        ///< (n - 1) phi / (1 + eps)
};

/// Smallest R1 with r Delta r >= (n-1) phi / (1 + eps) for all r >= R1 up to
/// r_max, located on the node grid and refined by bisection on the
/// interpolant; also checks r Delta r >= n - 1 on every node.
inline LaplacianBound verify_laplacian_bound(const JacobiSolution& jac, double phi, double eps) {
  if (!(phi > 1.0)) throw std::invalid_argument("verify_laplacian_bound: phi must exceed 1");
  if (!(eps > 0.0)) throw std::invalid_argument("verify_laplacian_bound: eps must be positive");
  const int n = jac.dimension();
  LaplacianBound out;
  out.threshold = (n - 1) * phi / (1.0 + eps);
  const auto& r = jac.radii();
  const auto& f = jac.f_values();
  const auto& fp = jac.fprime_values();
  auto excess = [&](double x) { return x * laplacian_r(jac, x) - out.threshold; };

  std::ptrdiff_t last_fail = -1;
  std::size_t first = 1;
  for (std::size_t i = first; i < r.size(); ++i) {
    const double rd = r[i] * (n - 1) * fp[i] / f[i];
    const double base = rd - (n - 1);
    out.min_base_margin = std::min(out.min_base_margin, base);
    if (base < -1e-10 * (n - 1)) out.base_bound_holds = false;
    if (rd < out.threshold) last_fail = static_cast<std::ptrdiff_t>(i);
  }
  if (last_fail < 0) {
    out.R1 = r[first];
  } else if (static_cast<std::size_t>(last_fail) + 1 >= r.size()) {
    out.R1 = kInf;
  } else {
    double lo = r[last_fail], hi = r[last_fail + 1];
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (excess(mid) < 0.0 ? lo : hi) = mid;
    }
    out.R1 = hi;
  }
  return out;
}

/// Almost-everywhere gradient bound L / f(r) for the radial extension of
/// L-Lipschitz data on the sphere at infinity.
inline double grad_theta_bound(const JacobiSolution& jac, double lipschitz, double r) {
  if (!(r > 0.0)) throw std::domain_error("grad_theta_bound: r must be positive");
  return lipschitz / jac.f(r);
}

}  // namespace hadamard
