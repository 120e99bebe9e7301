#include <catch2/catch_amalgamated.hpp>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/lambert_w.hpp>
#include <cmath>
#include <random>
#include <sstream>

#include "hadamard/young.hpp"

using namespace hadamard;
using Catch::Approx;

namespace {

const BridgeDensity& family() {
  static const BridgeDensity h = build_density(0.5, 1.25);
  return h;
}

const PhiFunction& phi_family() {
  static const PhiFunction phi = build_phi(young_from_density(family()));
  return phi;
}

const YoungPair<SquaredDensity<BridgeDensity>>& g1_family() {
  static const auto g1 = build_G1_F1(family());
  return g1;
}

double h_small_formula(double t, double lambda) {
  const double L = std::log(1.0 / t);
  return 1.0 / (L * std::pow(std::log(L), lambda));
}

}  // namespace

TEST_CASE("Lambert W principal branch", "[young][lambert]") {
  CHECK(lambert_w(0.0) == 0.0);
  CHECK(lambert_w(std::exp(1.0)) == Approx(1.0).epsilon(1e-15));
  CHECK(lambert_w(1.0) == Approx(0.5671432904097838).epsilon(1e-14));
  CHECK(std::abs(lambert_w(1.0) - 0.5671432904) < 1e-9);
  CHECK(lambert_w(-std::exp(-1.0)) == Approx(-1.0).margin(1e-7));
  CHECK_THROWS_AS(lambert_w(-0.5), std::domain_error);
  for (double x : {-0.3, -0.1, 1e-8, 0.5, 2.0, 10.0, 1e3, 1e10, 1e100, 1e300}) {
    const double w = lambert_w(x);
    CHECK(w == Approx(boost::math::lambert_w0(x)).epsilon(1e-13));
    if (x > -0.36 && x != 0.0) CHECK(w * std::exp(w) == Approx(x).epsilon(1e-12));
    if (x >= std::exp(1.0)) CHECK(w >= std::log(x) - std::log(std::log(x)));
  }
}

TEST_CASE("bridge density regimes", "[young][density]") {
  const BridgeDensity& h = family();
  REQUIRE(h.t_large() <= 4.0);
  CHECK(h(4.0) == Approx(16.0).epsilon(1e-14));
  CHECK(h(1e-6) == Approx(h_small_formula(1e-6, 1.25)).epsilon(1e-14));
  CHECK(h(1e-6) == Approx(0.021654).epsilon(1e-4));
  CHECK(h(1e-6) < h(1e-3));
  CHECK(h(0.0) == 0.0);

  // Strictly increasing across the bridge.
  double prev = 0.0;
  for (double t : geometric_grid(1e-8, 1e3, 200)) {
    const double v = h(t);
    CHECK(v > prev);
    prev = v;
  }

  // Value and slope continuous at both thresholds.
  for (double t0 : {h.t_small(), h.t_large()}) {
    const double d = 1e-9 * t0;
    CHECK(h(t0 - d) == Approx(h(t0 + d)).epsilon(1e-7));
    CHECK(h.derivative(t0 - d) == Approx(h.derivative(t0 + d)).epsilon(1e-6));
  }
  // Derivative against finite differences inside each regime.
  for (double t : {1e-4, 0.1, 1.0, 5.0}) {
    const double d = 1e-6 * t;
    CHECK(h.derivative(t) == Approx((h(t + d) - h(t - d)) / (2 * d)).epsilon(1e-7));
  }
}

TEST_CASE("bridge density inverse", "[young][density]") {
  const BridgeDensity& h = family();
  for (double t : {1e-200, 1e-30, 1e-6, 5e-3, 0.05, 0.7, 1.9, 3.0, 1e4}) {
    CHECK(h.inverse(h(t)) == Approx(t).epsilon(1e-11));
  }
  CHECK(h.log_inverse(h(1e-200)) == Approx(std::log(1e-200)).epsilon(1e-13));
  SquaredDensity<BridgeDensity> h2(h);
  for (double y : {1e-3, 1e-1, 0.3, 2.0, 50.0}) CHECK(h2(h2.inverse(y)) == Approx(y).epsilon(1e-8));
}

TEST_CASE("density parameter validation", "[young][density]") {
  CHECK_THROWS_AS(build_density(0.0, 1.25), std::invalid_argument);
  CHECK_THROWS_AS(build_density(1.0, 1.25), std::invalid_argument);
  CHECK_THROWS_AS(build_density(0.5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(build_density(0.5, 1.5), std::invalid_argument);
  CHECK_NOTHROW(build_density(0.9, 1.8));
  CHECK_NOTHROW(build_density(0.1, 1.05));
}

TEST_CASE("identity density gives the classical pair", "[young][pair]") {
  const auto pair = young_from_density(PowerDensity(1.0));
  for (double t : {1e-6, 0.3, 1.0, 7.5}) {
    CHECK(pair.G(t) == Approx(t * t / 2).epsilon(1e-12));
    CHECK(pair.F(t) == Approx(t * t / 2).epsilon(1e-12));
    CHECK(pair.G_inverse(t * t / 2) == Approx(t).epsilon(1e-12));
  }
  CHECK(young_margin(pair, 0.7, 0.7) == Approx(0.0).margin(1e-14));
  CHECK(young_margin(pair, 0.7, 0.2) > 0.0);

  const auto g1 = young_from_density(PowerDensity(2.0));
  for (double t : {0.01, 0.5, 3.0}) {
    CHECK(g1.G(t) == Approx(t * t * t / 3).epsilon(1e-12));
    CHECK(g1.F(t) == Approx(2.0 / 3.0 * std::pow(t, 1.5)).epsilon(1e-12));
  }
}

TEST_CASE("family primitives against an independent quadrature", "[young][pair]") {
  const auto& pair = phi_family().pair();
  const BridgeDensity& h = family();
  boost::math::quadrature::tanh_sinh<double> ts;
  for (double t : {1e-3, 0.05, 0.5, 1.5, 3.0}) {
    double g = 0.0;
    double a = 0.0;
    for (double b : {h.t_small(), h.t_large(), t}) {
      b = std::min(b, t);
      if (b > a) g += ts.integrate([&](double s) { return h(s); }, a, b);
      a = std::max(a, b);
    }
    CHECK(pair.G(t) == Approx(g).epsilon(1e-10));
  }
  for (double b : {0.05, 0.2, 1.0, 5.0}) {
    const double f = ts.integrate([&](double s) { return h.inverse(s); }, 0.0, b);
    CHECK(pair.F(b) == Approx(f).epsilon(1e-9));
  }
  CHECK(pair.G(0.0) == 0.0);
  CHECK(pair.F(0.0) == 0.0);
}

TEST_CASE("Young inequality on random pairs", "[young][pair]") {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> u(std::log(1e-3), std::log(1e2));
  auto run = [&](const auto& pair) {
    double worst = kInf;
    for (int i = 0; i < 1000; ++i) {
      const double a = std::exp(u(rng));
      const double b = std::exp(u(rng));
      const double ga = pair.G(a);
      const double fb = pair.F(b);
      worst = std::min(worst, (ga + fb - a * b) / (ga + fb));
    }
    CHECK(worst >= -1e-9);
    for (double a : {1e-3, 0.01, 0.3, 1.0, 2.5, 40.0}) {
      const double b = pair.density()(a);
      CHECK(young_margin(pair, a, b) == Approx(0.0).margin(1e-9 * a * b));
    }
  };
  run(phi_family().pair());
  run(g1_family());
  run(young_from_density(PowerDensity(1.0)));
}

TEST_CASE("primitives are convex and inverses round-trip", "[young][pair]") {
  const auto& pair = phi_family().pair();
  const auto& g1 = g1_family();
  const auto grid = geometric_grid(1e-4, 10.0, 10);
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
    const double a = grid[i - 1], b = grid[i], c = grid[i + 1];
    const double w = (c - b) / (c - a);
    CHECK(pair.G(b) <= w * pair.G(a) + (1 - w) * pair.G(c));
    CHECK(pair.F(b) <= w * pair.F(a) + (1 - w) * pair.F(c));
    CHECK(g1.F(b) <= w * g1.F(a) + (1 - w) * g1.F(c));
  }
  for (double y : {1e-250, 1e-40, 1e-13, 1e-6, 1e-2, 0.5, 3.0, 1e4, 1e9}) {
    CHECK(pair.G(pair.G_inverse(y)) == Approx(y).epsilon(1e-8));
    CHECK(pair.F(pair.F_inverse(y)) == Approx(y).epsilon(1e-8));
    CHECK(g1.G(g1.G_inverse(y)) == Approx(y).epsilon(1e-8));
  }
}

TEST_CASE("t G'(t) / G(t) tends to one", "[young][pair]") {
  const auto& pair = phi_family().pair();
  double prev = kInf;
  for (double t : {1e-2, 1e-4, 1e-8, 1e-16}) {
    const double r = t * family()(t) / pair.G(t);
    CHECK(std::abs(r - 1.0) < prev);
    prev = std::abs(r - 1.0);
  }
  CHECK(prev < 0.05);
}

TEST_CASE("tail primitive matches the double-range primitive", "[young][tail]") {
  const FamilyTail t1(family(), 1);
  const FamilyTail t2(family(), 2);
  for (double x : {1e-3, 1e-6, 1e-20, 1e-100}) {
    const Extended ex = Extended::from_double(x);
    REQUIRE(t1.covers(ex));
    CHECK(t1.G(ex).log_value() == Approx(phi_family().pair().log_G(x)).epsilon(1e-13));
    CHECK(t2.G(ex).log_value() == Approx(g1_family().log_G(x)).epsilon(1e-13));
    CHECK(relative_difference(t1.G_inverse(t1.G(ex)), ex) == Approx(0.0).margin(1e-12));
  }
  // Quadrature and asymptotic branches of kappa agree at the switch.
  const double ll = std::log(1e8);
  CHECK(t1.log_kappa(ll - 1e-9) == Approx(t1.log_kappa(ll + 1e-9)).epsilon(1e-6));
  const Extended tiny = Extended::doubly_small(1e10);
  CHECK(relative_difference(t2.G_inverse(t2.G(tiny)), tiny) == Approx(0.0).margin(1e-12));
}

TEST_CASE("psi integral converges and matches quadrature of 1/G^{-1}", "[young][phi]") {
  const PhiFunction& phi = phi_family();
  const auto& pair = phi.pair();
  // int ds / G^{-1}(s) over [s0, s1] in log s.
  auto direct = [&](double s0, double s1) {
    return integrate_segments([&](double z) { return std::exp(z) / pair.G_inverse(std::exp(z)); },
                              {std::log(s0), std::log(s1)}, 1e-11);
  };
  for (double s : {1e-8, 1e-3, 0.5, 1.0, 20.0}) {
    CHECK(phi.psi(s) - phi.psi(1e-300) == Approx(direct(1e-300, s)).epsilon(1e-8));
  }
  // The integrand near zero is bounded by the closed-form tail.
  CHECK(std::isfinite(phi.psi(1.0)));
  CHECK(phi.psi(Extended::doubly_small(50.0)) < phi.psi(1e-300));
  CHECK(phi.psi(Extended::doubly_small(1e12)) < phi.psi(Extended::doubly_small(50.0)));
}

TEST_CASE("psi asymptote at small t", "[young][phi]") {
  const PhiFunction& phi = phi_family();
  const double t = 1e-8;
  const double lambda = 1.25;
  const double asym = std::pow(std::log(std::log(1.0 / t)), 1.0 - lambda) / (lambda - 1.0);
  CHECK(phi.psi(t) / asym == Approx(1.0).margin(0.25));
  double prev = kInf;
  for (double s : {1e-8, 1e-30, 1e-100, 1e-300}) {
    const double a = std::pow(std::log(std::log(1.0 / s)), 1.0 - lambda) / (lambda - 1.0);
    const double dev = std::abs(phi.psi(s) / a - 1.0);
    CHECK(dev < prev);
    prev = dev;
  }
}

TEST_CASE("phi inverts psi", "[young][phi]") {
  const PhiFunction& phi = phi_family();
  for (double t : {0.01, 0.1, 1.0, 5.0, 20.0}) {
    const PhiValues v = phi.evaluate(t);
    CHECK(phi.psi(v.phi) == Approx(t).epsilon(1e-8));
  }
  // Strictly increasing, phi(0) = 0.
  CHECK(phi.phi(0.0) == 0.0);
  double prev = -kInf;
  for (double t : geometric_grid(1e-3, 50.0, 10)) {
    const double lp = phi.log_phi(t);
    const double lL = phi.evaluate(t).phi.log_neg_log();
    const double key = std::isfinite(lp) ? lp : -std::exp(lL);
    CHECK((key > prev || (!std::isfinite(key) && !std::isfinite(prev))));
    prev = key;
  }
  // Derivatives in the double range against finite differences.
  for (double t : {5.0, 12.0}) {
    const double d = 1e-6 * t;
    CHECK(phi.dphi(t) == Approx((phi.phi(t + d) - phi.phi(t - d)) / (2 * d)).epsilon(1e-6));
    CHECK(phi.d2phi(t) == Approx((phi.dphi(t + d) - phi.dphi(t - d)) / (2 * d)).epsilon(1e-6));
  }
}

TEST_CASE("G(phi') = phi on [1e-3, 1]", "[young][phi]") {
  const PhiFunction& phi = phi_family();
  for (double t : geometric_grid(1e-3, 1.0, 8)) CHECK(std::abs(phi_identity_error(phi, t)) <= 1e-6);
  for (double t : {3.0, 5.0, 12.0}) CHECK(std::abs(phi_identity_error(phi, t)) <= 1e-6);
}

TEST_CASE("log-log asymptotic form of phi", "[young][phi]") {
  const PhiFunction& phi = phi_family();
  double prev = kInf;
  for (double t : {3.5, 3.0, 2.5, 2.0}) {
    const double target = std::pow(0.25 * t, -4.0);
    const double dev = std::abs(phi.evaluate(t).phi.log_neg_log() / target - 1.0);
    CHECK(dev < prev);
    prev = dev;
  }
  CHECK(prev < 1e-3);
  CHECK(phi.evaluate(0.01).phi.log_neg_log() == Approx(std::pow(0.0025, -4.0)).epsilon(1e-14));
}

TEST_CASE("phi'' phi / phi'^2 and G1(phi'')/phi tend to one", "[young][phi]") {
  const PhiFunction& phi = phi_family();
  const auto& g1 = g1_family();
  double prev_c = kInf, prev_g = kInf;
  for (double t : {3.0, 2.5, 2.0}) {
    const double c = phi_curvature_ratio(phi, t);
    const double g = g1_phi_ratio(g1, phi, t);
    CHECK(c < 1.0);
    CHECK(std::abs(c - 1.0) < prev_c);
    CHECK(std::abs(g - 1.0) < prev_g);
    prev_c = std::abs(c - 1.0);
    prev_g = std::abs(g - 1.0);
  }
  for (double t : {0.05, 0.02, 0.01}) {
    CHECK(phi_curvature_ratio(phi, t) == Approx(1.0).margin(1e-12));
    CHECK(g1_phi_ratio(g1, phi, t) == Approx(1.0).margin(1e-12));
  }
  // phi <= c phi' over the sampled range.
  double worst = 0.0;
  for (double t : geometric_grid(1e-3, 1.0, 8)) {
    const PhiValues v = phi.evaluate(t);
    worst = std::max(worst, std::exp(v.phi.D - v.dphi.D));
  }
  CHECK(worst < 1.0);
}

TEST_CASE("F and F1 small-t bounds", "[young][bounds]") {
  const auto& pair = phi_family().pair();
  const auto ts = geometric_grid(1e-6, 1e-2, 5);
  for (double t : ts) CHECK(pair.log_F(t) <= log_F_bound(0.5, t));
  const double c = fit_F1_constant(g1_family(), ts);
  CHECK(std::isfinite(c));
  CHECK(c > 0.0);
  for (double t : ts) CHECK(g1_family().log_F(t) <= std::log(c) + log_F1_bound(1.25, t) + 1e-12);
}

TEST_CASE("young table export", "[young][io]") {
  std::ostringstream os;
  write_young_csv(os, phi_family(), {0.5, 1.0});
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "t,H,G,F,psi,phi,dphi,d2phi");
  std::getline(is, line);
  CHECK(std::count(line.begin(), line.end(), ',') == 7);
  CHECK(line.rfind("0.5,", 0) == 0);
}
