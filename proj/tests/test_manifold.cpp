#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "hadamard/manifold.hpp"

using namespace hadamard;
using Catch::Approx;

namespace {

// Closed form for the power profile with k = 0 on [0, 1]: match
// A r^phi + B r^(1 - phi) to f(1) = 1, f'(1) = 1.
double power_closed_form(double phi, double r) {
  if (r <= 1.0) return r;
  const double A = phi / (2.0 * phi - 1.0);
  const double B = 1.0 - A;
  return A * std::pow(r, phi) + B * std::pow(r, 1.0 - phi);
}

double power_closed_form_slope(double phi, double r) {
  if (r <= 1.0) return 1.0;
  const double A = phi / (2.0 * phi - 1.0);
  const double B = 1.0 - A;
  return A * phi * std::pow(r, phi - 1.0) + B * (1.0 - phi) * std::pow(r, -phi);
}

double bisect(auto g, double lo, double hi) {
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("eval_curvature per regime", "[manifold]") {
  CHECK(eval_curvature(CurvatureProfile::euclidean(), 3.0) == 0.0);
  CHECK(eval_curvature(CurvatureProfile::constant(1.0), 2.0) == -1.0);
  CHECK(eval_curvature(CurvatureProfile::power(2.0, 1.0), 2.0) == Approx(-0.5));
  CHECK(eval_curvature(CurvatureProfile::power(2.0, 1.0), 0.5) == 0.0);
  CHECK_THROWS_AS(eval_curvature(CurvatureProfile::euclidean(), -1.0), std::domain_error);

  SECTION("c1 bridge is nonpositive, continuous and C1 at both ends") {
    const auto p = CurvatureProfile::power(3.0, 2.0, BridgeKind::c1_cubic, 0.5);
    const double h = 1e-7;
    for (double r = 0.0; r <= 4.0; r += 0.01) CHECK(p(r) <= 0.0);
    CHECK(p(1.5) == 0.0);
    CHECK(p(1.5 + h) == Approx(0.0).margin(1e-12));
    CHECK(p(2.0 - h) == Approx(p(2.0)).epsilon(1e-6));
    const double slope_left = (p(2.0 - h) - p(2.0 - 2 * h)) / h;
    const double slope_right = (p(2.0 + 2 * h) - p(2.0 + h)) / h;
    CHECK(slope_left == Approx(slope_right).epsilon(1e-4));
    CHECK((p(1.5 + 2 * h) - p(1.5 + h)) / h == Approx(0.0).margin(1e-5));
  }

  SECTION("parameter validation") {
    CHECK_THROWS_AS(CurvatureProfile::power(1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(CurvatureProfile::power(2.0, 1.0, BridgeKind::c1_cubic, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(CurvatureProfile::custom({0.0, 1.0}, {0.0, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(CurvatureProfile::custom({0.0, 0.0}, {0.0, -0.5}), std::invalid_argument);
  }
}

TEST_CASE("custom profiles load from CSV and interpolate linearly", "[manifold][io]") {
  std::istringstream csv("r,k\n0,0\n1,-1\n3,-1\n");
  const auto p = CurvatureProfile::from_csv(csv);
  CHECK(p(0.5) == Approx(-0.5));
  CHECK(p(2.0) == Approx(-1.0));
  CHECK(p(10.0) == Approx(-1.0));
  std::istringstream bad("r,k\n0,0\n1,0.5\n");
  CHECK_THROWS_AS(CurvatureProfile::from_csv(bad), std::invalid_argument);
}

TEST_CASE("solve_jacobi matches closed forms", "[manifold][jacobi]") {
  SECTION("flat space: f(r) = r") {
    const auto jac = solve_jacobi(CurvatureProfile::euclidean(), 3, 10.0);
    for (double r : {0.0, 0.3, 1.0, 7.7, 10.0}) {
      CHECK(jac.f(r) == Approx(r).margin(1e-14));
      CHECK(jac.fprime(r) == Approx(1.0).epsilon(1e-14));
    }
  }
  SECTION("constant curvature: f(r) = sinh(r)") {
    const auto jac = solve_jacobi(CurvatureProfile::constant(1.0), 2, 10.0);
    CHECK(jac.f(1.0) == Approx(1.1752012).epsilon(1e-7));
    for (double r = 0.05; r <= 10.0; r += 0.173) {
      CHECK(std::abs(jac.f(r) / std::sinh(r) - 1.0) <= 1e-8);
      CHECK(std::abs(jac.fprime(r) / std::cosh(r) - 1.0) <= 1e-8);
    }
  }
  SECTION("power profile phi = 2: f = (2/3) r^2 + (1/3) / r beyond R0 = 1") {
    const auto jac = solve_jacobi(CurvatureProfile::power(2.0, 1.0), 3, 10.0);
    CHECK(jac.f(2.0) == Approx(17.0 / 6.0).epsilon(1e-9));
    for (double r = 1.0; r <= 10.0; r += 0.37) {
      CHECK(std::abs(jac.f(r) / power_closed_form(2.0, r) - 1.0) <= 1e-8);
      CHECK(std::abs(jac.fprime(r) / power_closed_form_slope(2.0, r) - 1.0) <= 1e-8);
    }
  }
  SECTION("argument validation and integrability failure") {
    CHECK_THROWS_AS(solve_jacobi(CurvatureProfile::euclidean(), 2, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(solve_jacobi(CurvatureProfile::euclidean(), 2, 1.0, 0.0), std::invalid_argument);
    const auto nan_profile = CurvatureProfile::custom({0.0, 1.0, 2.0}, {0.0, -1.0, -1.0});
    CHECK_NOTHROW(solve_jacobi(nan_profile, 2, 3.0));
  }
}

TEST_CASE("Jacobi solution invariants", "[manifold][jacobi][property]") {
  const std::vector<CurvatureProfile> profiles = {
      CurvatureProfile::euclidean(), CurvatureProfile::constant(0.7), CurvatureProfile::power(2.5, 1.5),
      CurvatureProfile::power(3.0, 2.0, BridgeKind::c1_cubic, 0.5),
      CurvatureProfile::custom({0.0, 1.0, 2.0, 4.0}, {0.0, -0.2, -2.0, -0.5})};
  for (const auto& p : profiles) {
    const auto jac = solve_jacobi(p, 3, 12.0);
    const auto& r = jac.radii();
    const auto& f = jac.f_values();
    const auto& fp = jac.fprime_values();
    CHECK(r.front() == 0.0);
    CHECK(f.front() == 0.0);
    CHECK(fp.front() == 1.0);
    for (std::size_t i = 1; i < r.size(); ++i) {
      CHECK(r[i] > r[i - 1]);
      CHECK(fp[i] >= fp[i - 1] * (1 - 1e-14));
      CHECK(f[i] >= r[i] * (1 - 1e-13));
      if (i > 1) CHECK(f[i] / r[i] >= f[i - 1] / r[i - 1] * (1 - 1e-13));
    }
  }
}

TEST_CASE("Rauch comparison: more negative curvature gives larger f", "[manifold][property]") {
  const auto weak = solve_jacobi(CurvatureProfile::constant(0.5), 2, 8.0);
  const auto strong = solve_jacobi(CurvatureProfile::constant(1.0), 2, 8.0);
  const auto flat = solve_jacobi(CurvatureProfile::euclidean(), 2, 8.0);
  const auto pw = solve_jacobi(CurvatureProfile::custom({0.0, 1.0}, {-0.25, -1.0}), 2, 8.0);
  for (double r = 0.01; r <= 8.0; r += 0.1) {
    CHECK(strong.f(r) >= weak.f(r));
    CHECK(weak.f(r) >= flat.f(r));
    // k_pw <= -0.25 = k of constant(0.5)
    CHECK(pw.f(r) >= weak.f(r) * (1 - 1e-12));
  }
}

TEST_CASE("integrator converges under tolerance refinement", "[manifold][property]") {
  for (const auto& p : {CurvatureProfile::constant(1.0), CurvatureProfile::power(2.0, 1.0)}) {
    const auto coarse = solve_jacobi(p, 2, 10.0, 1e-8);
    const auto fine = solve_jacobi(p, 2, 10.0, 1e-9);
    CHECK(std::abs(coarse.f(10.0) - fine.f(10.0)) <= 10.0 * 1e-8 * fine.f(10.0));
  }
}

TEST_CASE("laplacian_r", "[manifold][laplacian]") {
  const auto flat = solve_jacobi(CurvatureProfile::euclidean(), 3, 10.0);
  CHECK(laplacian_r(flat, 2.0) == Approx(1.0).epsilon(1e-14));
  for (double r = 0.01; r <= 10.0; r += 0.77) CHECK(laplacian_r(flat, r) * r == Approx(2.0).epsilon(1e-14));
  CHECK_THROWS_AS(laplacian_r(flat, 0.0), std::domain_error);

  const auto hyp = solve_jacobi(CurvatureProfile::constant(1.0), 2, 10.0);
  CHECK(laplacian_r(hyp, 2.0) == Approx(1.0 / std::tanh(2.0)).epsilon(1e-9));
  CHECK(laplacian_r(hyp, 2.0) == Approx(1.037314).margin(1e-6));

  const auto pw = solve_jacobi(CurvatureProfile::power(2.0, 1.0), 3, 10.0);
  CHECK(laplacian_r(pw, 2.0) == Approx(2.0 * (8.0 / 3.0 - 1.0 / 12.0) / (17.0 / 6.0)).epsilon(1e-9));
  CHECK(laplacian_r(pw, 2.0) == Approx(1.823529).margin(1e-6));
}

TEST_CASE("verify_laplacian_bound", "[manifold][laplacian]") {
  SECTION("flat space never reaches the strengthened bound") {
    const auto flat = solve_jacobi(CurvatureProfile::euclidean(), 3, 50.0);
    const auto b = verify_laplacian_bound(flat, 1.5, 0.1);
    CHECK(b.R1 == kInf);
    CHECK(b.base_bound_holds);
    CHECK(b.min_base_margin == Approx(0.0).margin(1e-12));
    CHECK(b.threshold == Approx(3.0 / 1.1));
  }
  SECTION("hyperbolic plane: r coth r = 50/11") {
    const auto hyp = solve_jacobi(CurvatureProfile::constant(1.0), 2, 20.0);
    const auto b = verify_laplacian_bound(hyp, 5.0, 0.1);
    const double oracle = bisect([](double r) { return r / std::tanh(r) - 50.0 / 11.0; }, 1.0, 10.0);
    CHECK(b.R1 == Approx(oracle).epsilon(1e-8));
    CHECK(b.R1 == Approx(4.545).epsilon(2e-3));
    CHECK(b.base_bound_holds);
  }
  SECTION("power profile phi = 2, n = 3: r Delta r tends to 4 > 4 / 1.1") {
    const auto pw = solve_jacobi(CurvatureProfile::power(2.0, 1.0), 3, 100.0);
    const auto b = verify_laplacian_bound(pw, 2.0, 0.1);
    CHECK(std::isfinite(b.R1));
    // Oracle from the closed form: 2 r f'/f = 4 / 1.1.
    const double oracle = bisect(
        [](double r) { return 2.0 * r * power_closed_form_slope(2.0, r) / power_closed_form(2.0, r) - 4.0 / 1.1; },
        1.0, 100.0);
    CHECK(b.R1 == Approx(oracle).epsilon(1e-7));
    CHECK(b.base_bound_holds);
  }
}

TEST_CASE("grad_theta_bound", "[manifold]") {
  CHECK(grad_theta_bound(solve_jacobi(CurvatureProfile::euclidean(), 2, 5.0), 1.0, 2.0) == Approx(0.5));
  CHECK(grad_theta_bound(solve_jacobi(CurvatureProfile::constant(1.0), 2, 5.0), 1.0, 2.0) ==
        Approx(1.0 / std::sinh(2.0)).epsilon(1e-9));
  CHECK(grad_theta_bound(solve_jacobi(CurvatureProfile::power(2.0, 1.0), 2, 5.0), 2.0, 2.0) ==
        Approx(12.0 / 17.0).epsilon(1e-9));
  CHECK_THROWS_AS(grad_theta_bound(solve_jacobi(CurvatureProfile::euclidean(), 2, 5.0), 1.0, 0.0),
                  std::domain_error);
}
