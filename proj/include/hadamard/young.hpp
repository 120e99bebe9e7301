#pragma once

// Young functions built from an increasing density: the bridge density H of
// the family, complementary primitive pairs (G, F), the doubly-exponentially
// small tail of those primitives, and the function phi obtained by inverting
// psi(t) = int_0^t ds / G^{-1}(s).

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hadamard/numerics.hpp"

namespace hadamard {

/// Principal branch W0 of the Lambert W function: w * exp(w) = x for
/// x >= -1/e. Halley iteration on w e^w - x below e and Newton on the
/// logarithmic form w + log w - log x above e, which never overflows.
inline double lambert_w(double x) {
  constexpr double inv_e = 0.36787944117144232159552377016146;
  if (std::isnan(x) || x < -inv_e * (1.0 + 1e-15))
    throw std::domain_error("lambert_w: argument below -1/e");
  if (x == 0.0) return 0.0;
  if (x <= -inv_e) return -1.0;
  if (x == kInf) return kInf;
  if (x > std::numbers::e) {
    const double lx = std::log(x);
    double w = lx - std::log(lx);
    for (int it = 0; it < 100; ++it) {
      const double f = w + std::log(w) - lx;
      const double step = f / (1.0 + 1.0 / w);
      w -= step;
      if (std::abs(step) <= 1e-16 * std::abs(w)) break;
    }
    return w;
  }
  double w;
  if (x < -0.25) {
    // Branch-point series in p = sqrt(2 (e x + 1)).
    const double p = std::sqrt(std::max(0.0, 2.0 * (std::numbers::e * x + 1.0)));
    w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
  } else {
    w = std::log1p(x);
    if (x < 0.5) w = x * (1.0 - x + 1.5 * x * x);
  }
  for (int it = 0; it < 100; ++it) {
    const double ew = std::exp(w);
    const double f = w * ew - x;
    const double wp1 = w + 1.0;
    if (wp1 == 0.0) break;
    const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
    const double step = f / denom;
    w -= step;
    if (std::abs(step) <= 1e-16 * std::max(1e-300, std::abs(w))) break;
  }
  return w;
}


/// An increasing homeomorphism of [0, inf). Besides plain evaluation a
/// density works in logarithmic coordinates z = log t so that arguments and
/// values far outside the double range keep their relative precision.
template <class D>
concept Density = requires(const D& d, double z) {
  { d(z) } -> std::convertible_to<double>;
  { d.inverse(z) } -> std::convertible_to<double>;
  // log rho(e^z)
  { d.log_value_at_log(z) } -> std::convertible_to<double>;
  // d log rho / d log t at t = e^z
  { d.slope_at_log(z) } -> std::convertible_to<double>;
  // log rho^{-1}(e^z)
  { d.log_inverse_at_log(z) } -> std::convertible_to<double>;
  // log t at points where rho is only C^1
  { d.log_breakpoints() } -> std::convertible_to<std::vector<double>>;
};

/// s -> s^p.
class PowerDensity {
 public:
  explicit PowerDensity(double p = 1.0) : p_(p) {
    if (!(p > 0.0 && std::isfinite(p))) throw std::invalid_argument("PowerDensity: exponent must be positive");
  }
  double exponent() const { return p_; }
  double operator()(double t) const { return t <= 0.0 ? 0.0 : std::pow(t, p_); }
  double inverse(double s) const { return s <= 0.0 ? 0.0 : std::pow(s, 1.0 / p_); }
  double log_value_at_log(double z) const { return p_ * z; }
  double slope_at_log(double) const { return p_; }
  double log_inverse_at_log(double z) const { return z / p_; }
  std::vector<double> log_breakpoints() const { return {}; }

 private:
  double p_;
};

/// The square of another density.
template <Density D>
class SquaredDensity {
 public:
  explicit SquaredDensity(D base) : base_(std::move(base)) {}
  const D& base() const { return base_; }
  double operator()(double t) const {
    const double v = base_(t);
    return v * v;
  }
  double inverse(double s) const { return s <= 0.0 ? 0.0 : base_.inverse(std::sqrt(s)); }
  double log_value_at_log(double z) const { return 2.0 * base_.log_value_at_log(z); }
  double slope_at_log(double z) const { return 2.0 * base_.slope_at_log(z); }
  double log_inverse_at_log(double z) const { return base_.log_inverse_at_log(0.5 * z); }
  std::vector<double> log_breakpoints() const { return base_.log_breakpoints(); }

 private:
  D base_;
};

/// H(t) = 1 / (log(1/t) (log log(1/t))^lambda) for t <= t_small,
/// H(t) = t^(1/eps0) for t >= t_large, and a cubic in (log t, log H) between.
class BridgeDensity {
 public:
  static BridgeDensity build(double eps0, double lambda, double t_small = 1e-2, double t_large = 2.0) {
    if (!(eps0 > 0.0 && eps0 < 1.0)) throw std::invalid_argument("eps0 must lie in (0, 1)");
    if (!(lambda > 1.0 && lambda < 1.0 + eps0)) throw std::invalid_argument("lambda must lie in (1, 1 + eps0)");
    if (!(t_small > 0.0 && t_small < std::exp(-1.0) && t_small < t_large))
      throw std::invalid_argument("thresholds must satisfy 0 < t_small < 1/e and t_small < t_large");
    for (int attempt = 0; attempt < 60; ++attempt, t_large *= 2.0) {
      BridgeDensity h(eps0, lambda, t_small, t_large);
      if (h.bridge_monotone()) return h;
    }
    throw NumericalError("BridgeDensity: no monotone bridge found");
  }

  double eps0() const { return eps0_; }
  double lambda() const { return lambda_; }
  double t_small() const { return t_small_; }
  double t_large() const { return t_large_; }
  /// log(1/t_small); the small regime is L >= L_small.
  double L_small() const { return -x0_; }

  double operator()(double t) const { return t <= 0.0 ? 0.0 : std::exp(log_value(t)); }
  double log_value(double t) const { return t <= 0.0 ? -kInf : log_value_at_log(std::log(t)); }
  double log_inverse(double s) const { return s <= 0.0 ? -kInf : log_inverse_at_log(std::log(s)); }
  double inverse(double s) const { return s <= 0.0 ? 0.0 : std::exp(log_inverse(s)); }

  double derivative(double t) const {
    if (t <= 0.0) return 0.0;
    return (*this)(t) * slope_at_log(std::log(t)) / t;
  }

  double log_value_at_log(double z) const {
    if (z <= x0_) return log_value_small(std::log(-z));
    if (z >= x1_) return z / eps0_;
    return hermite(z, x0_, x1_, y0_, y1_, d0_, d1_);
  }

  double slope_at_log(double z) const {
    if (z <= x0_) return small_slope(std::log(-z));
    if (z >= x1_) return 1.0 / eps0_;
    return hermite_slope(z, x0_, x1_, y0_, y1_, d0_, d1_);
  }

  double log_inverse_at_log(double ls) const {
    if (ls <= y0_) {
      // L (log L)^lambda = 1/s, so log L = lambda W(s^(-1/lambda) / lambda).
      const double arg = std::exp(-ls / lambda_) / lambda_;
      return -std::exp(lambda_ * lambert_w(arg));
    }
    if (ls >= y1_) return eps0_ * ls;
    return solve_increasing([&](double z) { return hermite(z, x0_, x1_, y0_, y1_, d0_, d1_) - ls; }, x0_, x1_,
                            [&](double z) { return hermite_slope(z, x0_, x1_, y0_, y1_, d0_, d1_); });
  }

  std::vector<double> log_breakpoints() const { return {x0_, x1_}; }

  /// log H in the small regime as a function of log L, L = log(1/t).
  double log_value_small(double log_L) const { return -log_L - lambda_ * std::log(log_L); }
  double small_slope(double log_L) const { return std::exp(-log_L) * (1.0 + lambda_ / log_L); }

 private:
  BridgeDensity(double eps0, double lambda, double t_small, double t_large)
      : eps0_(eps0), lambda_(lambda), t_small_(t_small), t_large_(t_large) {
    x0_ = std::log(t_small);
    x1_ = std::log(t_large);
    const double log_L = std::log(-x0_);
    y0_ = log_value_small(log_L);
    y1_ = x1_ / eps0;
    d0_ = small_slope(log_L);
    d1_ = 1.0 / eps0;
  }

  bool bridge_monotone() const {
    if (!(y1_ > y0_)) return false;
    // Slope of the cubic as a quadratic a s^2 + b s + c on s in [0, 1].
    const double delta = (y1_ - y0_) / (x1_ - x0_);
    const double a = -6.0 * delta + 3.0 * d0_ + 3.0 * d1_;
    const double b = 6.0 * delta - 4.0 * d0_ - 2.0 * d1_;
    const double c = d0_;
    if (!(d0_ > 0.0 && d1_ > 0.0)) return false;
    if (a > 0.0) {
      const double s = -b / (2.0 * a);
      if (s > 0.0 && s < 1.0 && a * s * s + b * s + c <= 0.0) return false;
    }
    return true;
  }

  double eps0_, lambda_, t_small_, t_large_;
  double x0_ = 0, x1_ = 0, y0_ = 0, y1_ = 0, d0_ = 0, d1_ = 0;
};

inline BridgeDensity build_density(double eps0, double lambda) { return BridgeDensity::build(eps0, lambda); }

/// G(t) = int_0^t rho and F(t) = int_0^t rho^{-1}. With x = e^z,
///   G(x) = x rho(x) int_0^inf e^{-u} rho(x e^{-u}) / rho(x) du,
///   F(rho(x)) = x rho(x) int_0^inf e^{-u} rho(x e^{-u}) / rho(x) sigma(x e^{-u}) du,
/// where sigma is the log-log slope of rho; the second form is int_0^b rho^{-1}
/// integrated by parts. Both stay accurate in the log domain when the values
/// underflow. Logarithms of the primitives on a geometric grid bracket the
/// inverses.
template <Density D>
class YoungPair {
 public:
  static constexpr double kCacheLo = 1e-12;
  static constexpr double kCacheHi = 1e6;
  static constexpr int kCachePerDecade = 40;

  explicit YoungPair(D density) : rho_(std::move(density)) {
    for (double x : geometric_grid(kCacheLo, kCacheHi, kCachePerDecade)) {
      const double z = std::log(x);
      g_cache_.z.push_back(z);
      g_cache_.log_value.push_back(log_G_at_log(z));
      f_cache_.z.push_back(z);
      f_cache_.log_value.push_back(log_F_at_log(z));
    }
  }

  const D& density() const { return rho_; }

  /// log G(e^z).
  double log_G_at_log(double z) const {
    return z + rho_.log_value_at_log(z) + std::log(moment(z, false));
  }
  /// log F(e^z).
  double log_F_at_log(double z) const {
    const double zx = rho_.log_inverse_at_log(z);
    return zx + rho_.log_value_at_log(zx) + std::log(moment(zx, true));
  }

  double log_G(double t) const { return t <= 0.0 ? -kInf : log_G_at_log(std::log(t)); }
  double log_F(double t) const { return t <= 0.0 ? -kInf : log_F_at_log(std::log(t)); }
  double G(double t) const { return t <= 0.0 ? 0.0 : std::exp(log_G(t)); }
  double F(double t) const { return t <= 0.0 ? 0.0 : std::exp(log_F(t)); }

  double G_inverse(double y) const {
    if (y <= 0.0) return 0.0;
    return std::exp(invert(std::log(y), g_cache_, [this](double z) { return log_G_at_log(z); },
                           [this](double z, double lg) { return std::exp(z + rho_.log_value_at_log(z) - lg); }));
  }
  double F_inverse(double y) const {
    if (y <= 0.0) return 0.0;
    return std::exp(invert(std::log(y), f_cache_, [this](double z) { return log_F_at_log(z); },
                           [this](double z, double lf) { return std::exp(z + rho_.log_inverse_at_log(z) - lf); }));
  }

 private:
  static constexpr double kTail = 64.0;

  struct Cache {
    std::vector<double> z;
    std::vector<double> log_value;
  };

  /// int_0^inf e^{-u} rho(x e^{-u}) / rho(x) [sigma(x e^{-u})] du at x = e^z.
  double moment(double z, bool with_slope) const {
    const double lr = rho_.log_value_at_log(z);
    // The integrand decays like exp(-(1 + sigma) u) near u = 0.
    const double scale = 1.0 / (1.0 + std::max(0.0, rho_.slope_at_log(z)));
    std::vector<double> breaks{0.0, kTail};
    for (double v : {0.25, 1.0, 4.0, 16.0}) breaks.push_back(v * scale);
    for (double zb : rho_.log_breakpoints())
      if (zb < z && z - zb < kTail) breaks.push_back(z - zb);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    auto f = [&](double u) {
      const double v = std::exp(-u + rho_.log_value_at_log(z - u) - lr);
      return with_slope ? v * rho_.slope_at_log(z - u) : v;
    };
    return integrate_segments(f, breaks, 1e-13);
  }

  /// Solves log P(e^z) = ly for z; dlog is d log P / dz given (z, log P).
  template <class LogP, class DLog>
  static double invert(double ly, const Cache& c, const LogP& log_p, const DLog& dlog) {
    auto g = [&](double z) { return log_p(z) - ly; };
    auto dg = [&](double z) { return dlog(z, log_p(z)); };
    double zlo, zhi;
    const auto it = std::upper_bound(c.log_value.begin(), c.log_value.end(), ly);
    if (it == c.log_value.begin()) {
      zhi = c.z.front();
      zlo = zhi - 10.0;
      while (g(zlo) > 0.0) {
        zhi = zlo;
        zlo -= 10.0;
        if (zlo < -745.0) return -kInf;
      }
    } else if (it == c.log_value.end()) {
      zlo = c.z.back();
      zhi = zlo + 1.0;
      while (g(zhi) < 0.0) {
        zlo = zhi;
        zhi += 1.0;
        if (zhi > 709.0) throw NumericalError("YoungPair: inverse beyond double range");
      }
    } else {
      const auto k = static_cast<std::size_t>(it - c.log_value.begin());
      zlo = c.z[k - 1];
      zhi = c.z[k];
    }
    return solve_increasing(g, zlo, zhi, dg, 1e-16);
  }

  D rho_;
  Cache g_cache_;
  Cache f_cache_;
};

template <Density D>
YoungPair<D> young_from_density(D density) {
  return YoungPair<D>(std::move(density));
}

/// G1(t) = int_0^t H^2 and F1 its complement.
inline YoungPair<SquaredDensity<BridgeDensity>> build_G1_F1(const BridgeDensity& h) {
  return YoungPair<SquaredDensity<BridgeDensity>>(SquaredDensity<BridgeDensity>(h));
}

/// Primitive of H^p for arguments in the small regime of H, carried as
/// Extended. With L = log(1/x) and g(L) = H(x),
/// int_0^x H^p = x H(x)^p kappa(L), kappa(L) = int_0^inf e^{-w} (g(L+w)/g(L))^p dw.
class FamilyTail {
 public:
  FamilyTail(const BridgeDensity& h, int power) : lambda_(h.lambda()), p_(power), L_small_(h.L_small()) {}

  int power() const { return p_; }
  bool covers(const Extended& x) const { return x.log_value() <= -L_small_; }

  /// log H(x)^p.
  double log_density(double log_L) const { return -p_ * (log_L + lambda_ * std::log(log_L)); }

  double log_kappa(double log_L) const {
    if (log_L > kAsymptoticLogL) return -p_ * std::exp(-log_L) * (1.0 + lambda_ / log_L);
    const double L = std::exp(log_L);
    const double llL = std::log(log_L);
    auto f = [&](double w) {
      const double lw = std::log(L + w);
      return std::exp(-w - p_ * (lw - log_L) - p_ * lambda_ * (std::log(lw) - llL));
    };
    return std::log(integrate_segments(f, {0.0, 1.0, 4.0, 16.0, 64.0}, 1e-14));
  }

  Extended G(const Extended& x) const {
    if (x.is_zero()) return x;
    const double lL = x.log_neg_log();
    return x.scaled(log_density(lL) + log_kappa(lL));
  }

  /// Solves G(x) = y by a Newton iteration on the log factor x / y.
  Extended G_inverse(const Extended& y) const {
    if (y.is_zero()) return y;
    double delta = 0.0;
    for (int it = 0; it < 100; ++it) {
      const double lL = y.scaled(delta).log_neg_log();
      const double next = -(log_density(lL) + log_kappa(lL));
      const double slope = p_ * std::exp(-lL) * (1.0 + lambda_ / lL);
      const double step = (next - delta) / (1.0 + slope);
      delta += step;
      if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(delta))) return y.scaled(delta);
    }
    throw NumericalError("FamilyTail: inverse did not converge");
  }

 private:
  static constexpr double kAsymptoticLogL = 18.420680743952367;  // log 1e8

  double lambda_;
  int p_;
  double L_small_;
};

struct PhiValues {
  Extended phi;
  Extended dphi;
  Extended d2phi;
};

/// phi = psi^{-1} for psi(t) = int_0^t ds / G^{-1}(s). With
/// Q(x) = int_0^x H(y)/y dy one has psi(G(x)) = Q(x), hence phi' = Q^{-1},
/// phi = G(phi') and phi'' = phi' / H(phi'). In the small regime
/// Q(x) = (log log 1/x)^{1-lambda} / (lambda - 1) in closed form.
class PhiFunction {
 public:
  explicit PhiFunction(YoungPair<BridgeDensity> pair)
      : pair_(std::move(pair)), tail_(pair_.density(), 1), lambda_(pair_.density().lambda()) {
    const BridgeDensity& h = pair_.density();
    q_small_ = std::pow(std::log(h.L_small()), 1.0 - lambda_) / (lambda_ - 1.0);
    const double lo = h.t_small();
    const double hi = std::max(1e6, 2.0 * h.t_large());
    for (double x : geometric_grid(lo, hi, 40)) {
      const double z = std::log(x);
      if (q_log_x_.empty()) {
        q_log_x_.push_back(z);
        q_values_.push_back(q_small_);
        continue;
      }
      q_values_.push_back(q_values_.back() + q_segment(q_log_x_.back(), z));
      q_log_x_.push_back(z);
    }
  }

  const YoungPair<BridgeDensity>& pair() const { return pair_; }
  const BridgeDensity& density() const { return pair_.density(); }
  const FamilyTail& tail() const { return tail_; }
  double q_small() const { return q_small_; }

  double q(double x) const {
    if (x <= 0.0) return 0.0;
    const BridgeDensity& h = density();
    if (x <= h.t_small()) return q_closed(std::log(-std::log(x)));
    const double z = std::log(x);
    if (z >= q_log_x_.back()) {
      const double e = h.eps0();
      return q_values_.back() + e * (std::pow(x, 1.0 / e) - std::exp(q_log_x_.back() / e));
    }
    const auto it = std::upper_bound(q_log_x_.begin(), q_log_x_.end(), z);
    const auto k = static_cast<std::size_t>(it - q_log_x_.begin()) - 1;
    return q_values_[k] + q_segment(q_log_x_[k], z);
  }

  double q(const Extended& x) const {
    if (x.is_zero()) return 0.0;
    if (tail_.covers(x)) return q_closed(x.log_neg_log());
    return q(x.value());
  }

  /// phi'(t).
  Extended q_inverse(double t) const {
    if (t <= 0.0) return {};
    if (t <= q_small_) return Extended::doubly_small(std::pow((lambda_ - 1.0) * t, -1.0 / (lambda_ - 1.0)));
    if (t >= q_values_.back()) {
      const double e = density().eps0();
      return Extended::from_double(std::pow((t - q_values_.back()) / e + std::exp(q_log_x_.back() / e), e));
    }
    const auto it = std::upper_bound(q_values_.begin(), q_values_.end(), t);
    const auto k = static_cast<std::size_t>(it - q_values_.begin());
    const double z = solve_increasing([&](double s) { return q(std::exp(s)) - t; }, q_log_x_[k - 1], q_log_x_[k],
                                      [&](double s) { return density()(std::exp(s)); }, 1e-16);
    return Extended::from_double(std::exp(z));
  }

  double psi(double s) const {
    if (s <= 0.0) return 0.0;
    return q(pair_.G_inverse(s));
  }

  double psi(const Extended& s) const {
    if (s.is_zero()) return 0.0;
    if (s.X != -kInf || s.D < -700.0) {
      const Extended x = tail_.G_inverse(s);
      if (tail_.covers(x)) return q_closed(x.log_neg_log());
    }
    return psi(s.value());
  }

  PhiValues evaluate(double t) const {
    PhiValues out;
    if (t <= 0.0) return out;
    out.dphi = q_inverse(t);
    if (tail_.covers(out.dphi)) {
      const double lL = out.dphi.log_neg_log();
      const double lH = density().log_value_small(lL);
      out.phi = out.dphi.scaled(lH + tail_.log_kappa(lL));
      out.d2phi = out.dphi.scaled(-lH);
    } else {
      const double x = out.dphi.value();
      out.phi = Extended::from_double(pair_.G(x));
      out.d2phi = Extended::from_double(x / density()(x));
    }
    return out;
  }

  double phi(double t) const { return evaluate(t).phi.value(); }
  double dphi(double t) const { return evaluate(t).dphi.value(); }
  double d2phi(double t) const { return evaluate(t).d2phi.value(); }
  double log_phi(double t) const { return evaluate(t).phi.log_value(); }
  double log_dphi(double t) const { return evaluate(t).dphi.log_value(); }

 private:
  double q_closed(double log_L) const { return std::pow(log_L, 1.0 - lambda_) / (lambda_ - 1.0); }

  double q_segment(double za, double zb) const {
    const BridgeDensity& h = density();
    std::vector<double> breaks{za};
    for (double zk : h.log_breakpoints())
      if (zk > za && zk < zb) breaks.push_back(zk);
    breaks.push_back(zb);
    return integrate_segments([&](double z) { return h(std::exp(z)); }, breaks, 1e-14);
  }

  YoungPair<BridgeDensity> pair_;
  FamilyTail tail_;
  double lambda_;
  double q_small_ = 0.0;
  std::vector<double> q_log_x_;
  std::vector<double> q_values_;
};

inline PhiFunction build_phi(YoungPair<BridgeDensity> pair) { return PhiFunction(std::move(pair)); }

/// Relative error of G(phi'(t)) against phi(t), where phi' is obtained by
/// central differences of phi instead of from the construction.
inline double phi_identity_error(const PhiFunction& phi, double t, double rel_step = 1e-5) {
  const double dt = rel_step * t;
  const PhiValues mid = phi.evaluate(t);
  const PhiValues lo = phi.evaluate(t - dt);
  const PhiValues hi = phi.evaluate(t + dt);
  const FamilyTail& tail = phi.tail();
  if (std::isfinite(mid.phi.X) && std::isfinite(lo.phi.X) && std::isfinite(hi.phi.X)) {
    // log phi = D - e^X, so (log phi)' = e^X (-X') (1 + D' e^{-X} / (-X')).
    const double dX = (hi.phi.X - lo.phi.X) / (2.0 * dt);
    const double dD = (hi.phi.D - lo.phi.D) / (2.0 * dt);
    const double log_m = mid.phi.X + std::log(-dX) + std::log1p(dD * std::exp(-mid.phi.X) / (-dX));
    const Extended dphi_fd = mid.phi.scaled(log_m);
    return relative_difference(tail.G(dphi_fd), mid.phi);
  }
  const double fd = (hi.phi.value() - lo.phi.value()) / (2.0 * dt);
  return phi.pair().G(fd) / mid.phi.value() - 1.0;
}

/// phi''(t) phi(t) / phi'(t)^2.
inline double phi_curvature_ratio(const PhiFunction& phi, double t) {
  const PhiValues v = phi.evaluate(t);
  if (v.phi.X == v.dphi.X && v.d2phi.X == v.dphi.X) return std::exp(v.d2phi.D + v.phi.D - 2.0 * v.dphi.D);
  return std::exp(v.d2phi.log_value() + v.phi.log_value() - 2.0 * v.dphi.log_value());
}

/// G1(phi''(t)) / phi(t).
inline double g1_phi_ratio(const YoungPair<SquaredDensity<BridgeDensity>>& g1, const PhiFunction& phi, double t) {
  const PhiValues v = phi.evaluate(t);
  const FamilyTail tail2(phi.density(), 2);
  if (tail2.covers(v.d2phi)) return 1.0 + relative_difference(tail2.G(v.d2phi), v.phi);
  return std::exp(g1.log_G(v.d2phi.value()) - v.phi.log_value());
}

/// log of t^(1+eps0) exp(-(1/t) log(e + 1/t)^(-1-eps0)).
inline double log_F_bound(double eps0, double t) {
  return (1.0 + eps0) * std::log(t) - std::pow(std::log(std::exp(1.0) + 1.0 / t), -1.0 - eps0) / t;
}

/// log of t exp(-2^lambda t^(-1/2) log(1/t)^(-lambda)); the F1 bound up to its constant.
inline double log_F1_bound(double lambda, double t) {
  return std::log(t) - std::pow(2.0, lambda) / std::sqrt(t) * std::pow(-std::log(t), -lambda);
}

/// Smallest c with F1(t) <= c * bound(t) over the samples.
inline double fit_F1_constant(const YoungPair<SquaredDensity<BridgeDensity>>& g1, const std::vector<double>& ts) {
  const double lambda = g1.density().base().lambda();
  double worst = -kInf;
  for (double t : ts) worst = std::max(worst, g1.log_F(t) - log_F1_bound(lambda, t));
  return std::exp(worst);
}

/// G(a) + F(b) - a b.
template <Density D>
double young_margin(const YoungPair<D>& pair, double a, double b) {
  return pair.G(a) + pair.F(b) - a * b;
}

/// Rows of (t, H, G, F, psi, phi, phi', phi'') at 17 significant digits.
inline void write_young_csv(std::ostream& os, const PhiFunction& phi, const std::vector<double>& ts) {
  os << "t,H,G,F,psi,phi,dphi,d2phi\n";
  const auto& pair = phi.pair();
  for (double t : ts) {
    const PhiValues v = phi.evaluate(t);
    const double row[] = {t, pair.density()(t), pair.G(t), pair.F(t), phi.psi(t),
                          v.phi.value(), v.dphi.value(), v.d2phi.value()};
    for (std::size_t i = 0; i < 8; ++i) os << (i ? "," : "") << format_number(row[i]);
    os << '\n';
  }
}

}  // namespace hadamard
