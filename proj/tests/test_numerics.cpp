#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "hadamard/numerics.hpp"

using namespace hadamard;
using Catch::Approx;

TEST_CASE("adaptive quadrature reproduces closed forms", "[numerics][quadrature]") {
  auto r = integrate([](double x) { return std::exp(-x) * std::sin(x); }, 0.0, 20.0, 1e-13);
  CHECK(r.converged);
  CHECK(r.value == Approx(0.5 * (1.0 - std::exp(-20.0) * (std::sin(20.0) + std::cos(20.0)))).epsilon(1e-13));

  // Integrable endpoint singularity.
  auto s = integrate([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0, 1e-10);
  CHECK(s.value == Approx(2.0).epsilon(1e-9));

  auto z = integrate([](double) { return 1.0; }, 2.0, 2.0);
  CHECK(z.value == 0.0);
  CHECK(z.converged);
}

TEST_CASE("integrate_segments sums over breakpoints", "[numerics][quadrature]") {
  auto f = [](double x) { return x < 1.0 ? x : 2.0 - x; };
  CHECK(integrate_segments(f, {0.0, 1.0, 2.0}) == Approx(1.0).epsilon(1e-14));
}

TEST_CASE("solve_increasing finds bracketed roots", "[numerics][roots]") {
  const double x = solve_increasing([](double t) { return t * t * t - 2.0; }, 0.0, 2.0,
                                    [](double t) { return 3.0 * t * t; });
  CHECK(x == Approx(std::cbrt(2.0)).epsilon(1e-14));
  CHECK_THROWS_AS(solve_increasing([](double t) { return t + 5.0; }, 0.0, 1.0), NumericalError);
}

TEST_CASE("LogSum accumulates in the log domain", "[numerics]") {
  LogSum s;
  CHECK(s.log() == -kInf);
  s.add_log(-1000.0);
  s.add_log(-1000.0);
  CHECK(s.log() == Approx(-1000.0 + std::log(2.0)));
  s.add_log(-kInf);
  CHECK(s.log() == Approx(-1000.0 + std::log(2.0)));
  LogSum t;
  t.add_log(std::log(3.0));
  t.add_log(std::log(4.0));
  CHECK(t.value() == Approx(7.0));
}

TEST_CASE("Extended reals keep relative precision far below the double range", "[numerics]") {
  const Extended a = Extended::doubly_small(1e14, 0.25);
  const Extended b = Extended::doubly_small(1e14, 0.25 + 1e-9);
  CHECK(relative_difference(b, a) == Approx(1e-9).epsilon(1e-6));
  CHECK(a.log_value() == -kInf);
  CHECK(a.log_neg_log() == Approx(1e14));

  const Extended c = Extended::from_double(0.125);
  CHECK(c.value() == Approx(0.125));
  CHECK(c.log_neg_log() == Approx(std::log(std::log(8.0))));
  const Extended d = Extended::doubly_small(std::log(3.0));
  CHECK(d.value() == Approx(std::exp(-3.0)));
}

TEST_CASE("Hermite interpolation is exact for cubics", "[numerics]") {
  auto p = [](double x) { return 2 * x * x * x - x + 1; };
  auto dp = [](double x) { return 6 * x * x - 1; };
  for (double x : {0.1, 0.5, 0.9}) {
    CHECK(hermite(x, 0.0, 1.0, p(0), p(1), dp(0), dp(1)) == Approx(p(x)).epsilon(1e-14));
    CHECK(hermite_slope(x, 0.0, 1.0, p(0), p(1), dp(0), dp(1)) == Approx(dp(x)).epsilon(1e-13));
  }
}

TEST_CASE("extended products, ratios and sums", "[numerics]") {
  const Extended a = Extended::doubly_small(10.0, 0.5);
  const Extended b = Extended::doubly_small(10.0, -0.25);
  CHECK(log_ratio(a, b) == Approx(0.75));
  CHECK(log_ratio(Extended{}, a) == -kInf);
  CHECK(log_ratio(a, Extended{}) == kInf);
  // a^3 = exp(1.5 - 3 e^10).
  const Extended cube = a.power(3.0);
  CHECK(cube.log_value() == Approx(1.5 - 3.0 * std::exp(10.0)).epsilon(1e-14));

  const Extended x = Extended::from_double(0.3);
  const Extended y = Extended::doubly_small(std::log(2.0), std::log(5.0));  // 5 e^-2
  CHECK(log_ratio(y, x) == Approx(std::log(5.0 * std::exp(-2.0) / 0.3)).epsilon(1e-14));
  CHECK(y.rebased(-kInf).value() == Approx(5.0 * std::exp(-2.0)).epsilon(1e-14));

  ExtendedSum s;
  CHECK(s.total().is_zero());
  s.add(x);
  s.add(y);
  s.add(Extended{});
  CHECK(s.total().value() == Approx(0.3 + 5.0 * std::exp(-2.0)).epsilon(1e-14));

  // Terms far apart in X: the smaller X dominates.
  ExtendedSum t;
  t.add(Extended::doubly_small(30.0));
  t.add(Extended::doubly_small(20.0, 1.0));
  CHECK(t.total().X == 20.0);
  CHECK(t.total().D == Approx(1.0).epsilon(1e-15));
  ExtendedSum u;
  u.add(Extended::doubly_small(20.0));
  u.add(Extended::doubly_small(20.0));
  CHECK(u.total().D == Approx(std::log(2.0)).epsilon(1e-14));
}
