#pragma once

// Exhaustion by geodesic balls and numerical checks of the estimates that
// carry boundary values to infinity: phi-integrals, the Caccioppoli energy
// inequality, Moser-type sup ratios, decay of F and F1, and the attainment
// metric delta(R; rho).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hadamard/manifold.hpp"
#include "hadamard/numerics.hpp"
#include "hadamard/pde.hpp"
#include "hadamard/young.hpp"
#include "json.hpp"

namespace hadamard {

/// A hypothesis of the existence theorem fails numerically (divergent
/// budget integral, decay inequality never reached).
class HypothesisViolation : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

inline bool dimension_gate(int n, double phi) {
  if (n < 2) throw std::invalid_argument("dimension_gate: n must be >= 2");
  if (!(phi > 1.0)) throw std::invalid_argument("dimension_gate: phi must exceed 1");
  return n > 4.0 / phi + 1.0;
}

/// Measure of the polar-angle factor, int_0^pi sin^{n-2}.
inline double angular_measure(int n) {
  return std::sqrt(std::numbers::pi) * std::tgamma(0.5 * (n - 1)) / std::tgamma(0.5 * n);
}

/// Piecewise-linear radial cutoff through (r_k, eta_k), constant beyond the
/// last knot.
class RadialCutoff {
 public:
  RadialCutoff(std::string name, std::vector<double> r, std::vector<double> eta)
      : name_(std::move(name)), r_(std::move(r)), eta_(std::move(eta)) {
    if (r_.size() != eta_.size() || r_.empty()) throw std::invalid_argument("RadialCutoff: knot count mismatch");
    for (std::size_t k = 1; k < r_.size(); ++k)
      if (!(r_[k] > r_[k - 1])) throw std::invalid_argument("RadialCutoff: knots must increase");
  }

  static RadialCutoff zero() { return RadialCutoff("zero", {0.0}, {0.0}); }
  /// 1 at the pole, 0 from `support` on.
  static RadialCutoff tent(double support) { return RadialCutoff("tent", {0.0, support}, {1.0, 0.0}); }
  /// 1 on [0, inner], 0 from `support` on.
  static RadialCutoff plateau(double inner, double support) {
    return RadialCutoff("plateau", {0.0, inner, support}, {1.0, 1.0, 0.0});
  }

  const std::string& name() const { return name_; }
  double support() const {
    for (std::size_t k = 0; k < r_.size(); ++k)
      if (eta_[k] == 0.0 && std::all_of(eta_.begin() + k, eta_.end(), [](double e) { return e == 0.0; }))
        return r_[k];
    return kInf;
  }
  bool nonnegative() const {
    return std::all_of(eta_.begin(), eta_.end(), [](double e) { return e >= 0.0; });
  }

  double operator()(double r) const {
    if (r <= r_.front()) return eta_.front();
    if (r >= r_.back()) return eta_.back();
    const std::size_t k = segment(r);
    return eta_[k] + (r - r_[k]) * (eta_[k + 1] - eta_[k]) / (r_[k + 1] - r_[k]);
  }
  double slope(double r) const {
    if (r < r_.front() || r >= r_.back() || r_.size() < 2) return 0.0;
    const std::size_t k = segment(r);
    return (eta_[k + 1] - eta_[k]) / (r_[k + 1] - r_[k]);
  }

 private:
  std::size_t segment(double r) const {
    auto it = std::upper_bound(r_.begin(), r_.end(), r);
    return std::min(static_cast<std::size_t>(it - r_.begin()) - 1, r_.size() - 2);
  }

  std::string name_;
  std::vector<double> r_, eta_;
};

namespace detail {

inline void require_radius(const DiscreteField& field, double rho, const char* who) {
  const auto& g = field.grid();
  if (!(rho >= g.R_in() && rho <= g.R())) throw std::domain_error(std::string(who) + ": radius outside the grid");
}

/// (u_r, u_theta) at cell (i, j) by central differences, with ghost values
/// across Dirichlet faces and even reflection in theta.
inline std::pair<double, double> cell_gradient(const DiscreteField& field, int i, int j) {
  const auto& g = field.grid();
  const int N = g.n_r();
  const int M = g.n_theta();
  const double th = g.theta()[j];
  auto ring = [&](int k) {
    if (k == N) return 2.0 * field.outer()(th) - field.at(N - 1, j);
    if (k == -1) return g.annulus() ? 2.0 * (*field.inner())(th) - field.at(0, j) : field.pole();
    return field.at(k, j);
  };
  const double ur = (ring(i + 1) - ring(i - 1)) / (2.0 * g.h_r());
  const double ut = (field.at(i, std::min(j + 1, M - 1)) - field.at(i, std::max(j - 1, 0))) / (2.0 * g.h_theta());
  return {ur, ut};
}

}  // namespace detail

/// max over the angular grid of |u(rho, theta) - g(theta)|.
inline double attainment_metric(const DiscreteField& field, const BoundaryData& data, double rho) {
  detail::require_radius(field, rho, "attainment_metric");
  double worst = 0.0;
  for (double th : field.grid().theta()) worst = std::max(worst, std::abs(field.sample(rho, th) - data(th)));
  return worst;
}

/// sum over ring cells of phi(|u - theta| / nu) dV; the pole cell, where the
/// radial extension has no value, is left out.
inline Extended phi_integral(const DiscreteField& field, const BoundaryData& data, const PhiFunction& phi,
                             double nu) {
  if (!(nu > 0.0)) throw std::invalid_argument("phi_integral: nu must be positive");
  const auto& g = field.grid();
  ExtendedSum sum;
  for (int i = 0; i < g.n_r(); ++i)
    for (int j = 0; j < g.n_theta(); ++j) {
      const double h = std::abs(field.at(i, j) - data(g.theta()[j])) / nu;
      if (h == 0.0) continue;
      sum.add(phi.evaluate(h).phi.scaled(std::log(g.volume(i, j))));
    }
  return sum.total();
}

struct BudgetResult {
  double value = 0.0;       ///< integral over B(o, R)
  double total = 0.0;       ///< estimate of the integral over M
  double last_piece = 0.0;  ///< contribution of the outermost doubling shell
};

/// int_{B_R} F(r L / f) + F1(r^2 L^2 / f^2) dV, with L the angular Lipschitz
/// constant of the data. The tail beyond R is summed over doubling shells up
/// to r_max; shells that stop shrinking signal divergence.
template <class PairF, class PairF1>
BudgetResult rhs_budget(const JacobiSolution& jac, const BoundaryData& data, const PairF& F, const PairF1& F1,
                        double R) {
  if (!(R > 0.0) || R > jac.r_max()) throw std::invalid_argument("rhs_budget: R outside the Jacobi range");
  const int n = jac.dimension();
  const double L = data.lipschitz();
  const double sphere = angular_measure(n);
  BudgetResult out;
  if (L == 0.0) return out;
  auto integrand = [&](double r) {
    const double f = r == 0.0 ? 1.0 : jac.f(r);
    const double a = r == 0.0 ? L : r * L / f;
    const double lv = (n - 1) * std::log(f);
    const double t1 = std::exp(F.log_F(a) + lv);
    const double t2 = std::exp(F1.log_F(a * a) + lv);
    return sphere * (t1 + t2);
  };
  auto piece = [&](double a, double b) {
    std::vector<double> breaks{a};
    for (double x : jac.profile().breakpoints())
      if (x > a && x < b) breaks.push_back(x);
    breaks.push_back(b);
    return integrate_segments(integrand, breaks, 1e-10, 1e-300);
  };
  out.value = piece(0.0, R);
  double total = out.value;
  double prev = kInf;
  bool shrinking = true;
  double a = R;
  while (a < jac.r_max()) {
    const double b = std::min(2.0 * a, jac.r_max());
    const double p = piece(a, b);
    if (b == 2.0 * a) shrinking = p < prev || p <= 1e-300;
    prev = p;
    out.last_piece = p;
    total += p;
    a = b;
  }
  out.total = total;
  if (!std::isfinite(total) || !shrinking || out.last_piece > 1e-6 * std::max(total, 1e-300))
    throw HypothesisViolation("rhs_budget: integral over the manifold diverges");
  return out;
}

struct CaccioppoliResult {
  std::string cutoff;
  Extended lhs;
  Extended rhs;
  double log_ratio = kNaN;  ///< log(lhs / rhs); -inf when lhs vanishes
  bool holds = true;
};

/// eps in the energy inequality mapped to (eps1, C_eps):
/// 4 + eps = 4 / (1 - eps1), C_eps = 2 / (eps1 (2 - eps1)).
inline std::pair<double, double> caccioppoli_constants(double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("caccioppoli: eps must be positive");
  const double eps1 = eps / (4.0 + eps);
  return {eps1, 2.0 / (eps1 * (2.0 - eps1))};
}

/// lhs = sum eta^2 phi'(h) |du|^2 / sqrt(1 + |du|^2) dV,
/// rhs = C_eps sum eta^2 phi'(h) |d theta|^2 dV + (4 + eps) nu^2 sum (phi^2 / phi')(h) |d eta|^2 dV,
/// h = |u - theta| / nu, over the ring cells.
inline CaccioppoliResult caccioppoli_check(const DiscreteField& field, const BoundaryData& data,
                                           const RadialCutoff& eta, const PhiFunction& phi, double nu, double eps) {
  const auto& g = field.grid();
  if (!eta.nonnegative()) throw std::invalid_argument("caccioppoli_check: cutoff must be nonnegative");
  if (eta(g.R()) != 0.0 || (g.annulus() && eta(g.R_in()) != 0.0))
    throw std::invalid_argument("caccioppoli_check: cutoff must vanish on the Dirichlet boundary");
  if (!(nu > 0.0)) throw std::invalid_argument("caccioppoli_check: nu must be positive");
  const double C_eps = caccioppoli_constants(eps).second;
  ExtendedSum lhs, rhs;
  for (int i = 0; i < g.n_r(); ++i) {
    const double r = g.r()[i];
    const double e = eta(r);
    const double de = eta.slope(r);
    if (e == 0.0 && de == 0.0) continue;
    const double f = g.f(i);
    for (int j = 0; j < g.n_theta(); ++j) {
      const double th = g.theta()[j];
      const double h = std::abs(field.at(i, j) - data(th)) / nu;
      if (h == 0.0) continue;
      const PhiValues v = phi.evaluate(h);
      const double dV = g.volume(i, j);
      const auto [ur, ut] = detail::cell_gradient(field, i, j);
      const double du2 = ur * ur + ut * ut / (f * f);
      const double dth = data.derivative(th) / f;
      if (e > 0.0) {
        if (du2 > 0.0) lhs.add(v.dphi.scaled(std::log(e * e * du2 / std::sqrt(1.0 + du2) * dV)));
        if (dth != 0.0) rhs.add(v.dphi.scaled(std::log(C_eps * e * e * dth * dth * dV)));
      }
      if (de != 0.0) {
        const Extended q = v.phi.X == v.dphi.X ? Extended{v.phi.X, 2.0 * v.phi.D - v.dphi.D}
                                               : Extended::from_double(std::exp(2.0 * v.phi.log_value() -
                                                                                v.dphi.log_value()));
        rhs.add(q.scaled(std::log((4.0 + eps) * nu * nu * de * de * dV)));
      }
    }
  }
  CaccioppoliResult out;
  out.cutoff = eta.name();
  out.lhs = lhs.total();
  out.rhs = rhs.total();
  if (out.lhs.is_zero()) {
    out.log_ratio = -kInf;
    out.holds = true;
  } else {
    out.log_ratio = log_ratio(out.lhs, out.rhs);
    out.holds = out.log_ratio <= std::log1p(1e-6);
  }
  return out;
}

namespace detail {

/// Dijkstra distances from `source` over cell centers (pole included) with
/// radial, angular and diagonal edges measured in dr^2 + f^2 dtheta^2.
inline std::vector<double> cell_distances(const PolarGrid& g, int source) {
  const int U = g.unknowns();
  const int N = g.n_r();
  const int M = g.n_theta();
  std::vector<double> dist(U, kInf);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[source] = 0.0;
  queue.push({0.0, source});
  const int offset = g.annulus() ? 0 : 1;
  auto relax = [&](int to, double d) {
    if (d < dist[to]) {
      dist[to] = d;
      queue.push({d, to});
    }
  };
  while (!queue.empty()) {
    const auto [d, k] = queue.top();
    queue.pop();
    if (d > dist[k]) continue;
    if (!g.annulus() && k == 0) {
      for (int j = 0; j < M; ++j) relax(g.index(0, j), d + g.h_r());
      continue;
    }
    const int i = (k - offset) / M;
    const int j = (k - offset) % M;
    if (i == 0 && !g.annulus()) relax(0, d + g.h_r());
    for (int di = -1; di <= 1; ++di)
      for (int dj = -1; dj <= 1; ++dj) {
        if (di == 0 && dj == 0) continue;
        const int ii = i + di, jj = j + dj;
        if (ii < 0 || ii >= N || jj < 0 || jj >= M) continue;
        const double fm = di == 0 ? g.f(i) : g.f_face(std::max(i, ii));
        const double dr = di * g.h_r();
        const double dt = dj * fm * g.h_theta();
        relax(g.index(ii, jj), d + std::sqrt(dr * dr + dt * dt));
      }
  }
  return dist;
}

}  // namespace detail

struct MoserResult {
  double r = 0.0;
  double theta = 0.0;
  double s = 0.0;
  Extended sup_power;  ///< sup over B(x, s/2) of phi(h)^{n+1}
  Extended integral;   ///< integral over B(x, s) of phi(h)
  double log_ratio = -kInf;
  double ratio() const { return std::exp(log_ratio); }
};

/// sup_{B(x, s/2)} phi(h)^{n+1} / int_{B(x, s)} phi(h) with geodesic balls
/// taken from graph distances between cell centers.
inline MoserResult moser_ratio(const DiscreteField& field, const BoundaryData& data, const PhiFunction& phi,
                               double nu, double r, double theta, double s, double sobolev_radius) {
  const auto& g = field.grid();
  if (!(s > 0.0) || !(s < sobolev_radius)) throw std::invalid_argument("moser_ratio: need 0 < s < Sobolev radius");
  if (!(nu > 0.0)) throw std::invalid_argument("moser_ratio: nu must be positive");
  if (r + s >= g.R() || (g.annulus() && r - s <= g.R_in()) || r < 0.0)
    throw std::domain_error("moser_ratio: ball leaves the domain");
  const int n = g.dimension();
  int source = 0;
  if (g.annulus() || r >= 0.5 * g.h_r() + g.R_in()) {
    const double r0 = g.annulus() ? g.R_in() + 0.5 * g.h_r() : g.h_r();
    const int i = std::clamp(static_cast<int>(std::lround((r - r0) / g.h_r())), 0, g.n_r() - 1);
    const int j = std::clamp(static_cast<int>(theta / g.h_theta()), 0, g.n_theta() - 1);
    source = g.index(i, j);
  }
  const auto dist = detail::cell_distances(g, source);
  MoserResult out{r, theta, s, {}, {}, -kInf};
  ExtendedSum integral;
  Extended sup;
  const int offset = g.annulus() ? 0 : 1;
  for (int k = 0; k < g.unknowns(); ++k) {
    if (dist[k] > s) continue;
    if (k < offset) continue;
    const int i = (k - offset) / g.n_theta();
    const int j = (k - offset) % g.n_theta();
    const double h = std::abs(field.values()[k] - data(g.theta()[j])) / nu;
    if (h == 0.0) continue;
    const Extended p = phi.evaluate(h).phi;
    integral.add(p.scaled(std::log(g.volume(i, j))));
    if (dist[k] <= 0.5 * s) {
      const Extended pw = p.power(n + 1.0);
      if (sup.is_zero() || log_ratio(pw, sup) > 0.0) sup = pw;
    }
  }
  out.sup_power = sup;
  out.integral = integral.total();
  if (!out.sup_power.is_zero()) out.log_ratio = log_ratio(out.sup_power, out.integral);
  return out;
}

/// Smallest scanned r* with F(r/f) f^{C(n-1)} <= r^{-2} and
/// F1(r^2/f^2) f^{C(n-1)} <= r^{-2} at every scanned r >= r*, on a log grid
/// of [r_lo, r_hi]. Both left sides must also be decreasing beyond r*.
template <class PairF, class PairF1>
double decay_check(const PairF& F, const PairF1& F1, const JacobiSolution& jac, double C, double r_lo, double r_hi,
                   int per_decade = 20) {
  if (!(C > 0.0)) throw std::invalid_argument("decay_check: C must be positive");
  if (!(r_lo > 0.0 && r_hi > r_lo)) throw std::invalid_argument("decay_check: bad scan range");
  if (r_hi > jac.r_max() * (1.0 + 1e-12)) throw std::invalid_argument("decay_check: scan beyond the Jacobi range");
  const int n = jac.dimension();
  const auto rs = geometric_grid(r_lo, std::min(r_hi, jac.r_max()), per_decade);
  std::vector<double> lhs1, lhs2;
  std::vector<bool> ok;
  for (double r : rs) {
    const double f = jac.f(r);
    const double a = r / f;
    const double vol = C * (n - 1) * std::log(f);
    lhs1.push_back(F.log_F(a) + vol);
    lhs2.push_back(F1.log_F(a * a) + vol);
    const double bound = -2.0 * std::log(r);
    ok.push_back(lhs1.back() <= bound && lhs2.back() <= bound);
  }
  if (!ok.back()) throw HypothesisViolation("decay_check: inequalities fail at the end of the scan");
  std::size_t first = rs.size() - 1;
  while (first > 0 && ok[first - 1]) --first;
  for (std::size_t k = first + 1; k < rs.size(); ++k)
    if (lhs1[k] > lhs1[k - 1] || lhs2[k] > lhs2[k - 1])
      throw HypothesisViolation("decay_check: left sides are not decreasing beyond r*");
  return rs[first];
}

/// Smallest nu = C1 2^k with phi(T) <= 1, phi'(T) <= 1 and
/// sup_{t <= T} phi / phi' <= 10 for T = 2 C1 / nu.
inline double select_nu(const PhiFunction& phi, double C1) {
  if (!(C1 >= 0.0)) throw std::invalid_argument("select_nu: C1 must be nonnegative");
  if (C1 == 0.0) return 1.0;
  auto admissible = [&](double T) {
    const PhiValues v = phi.evaluate(T);
    if (v.phi.log_value() > 0.0 || v.dphi.log_value() > 0.0) return false;
    for (double t : geometric_grid(1e-6 * T, T, 20)) {
      const PhiValues w = phi.evaluate(t);
      if (log_ratio(w.phi, w.dphi) > std::log(10.0)) return false;
    }
    return true;
  };
  for (int k = -30; k <= 60; ++k) {
    const double nu = std::ldexp(C1, k);
    if (admissible(2.0 * C1 / nu)) return nu;
  }
  throw NumericalError("select_nu: no admissible nu");
}

/// Fixed radius, or a fraction of the exhaustion radius.
struct ProbeSpec {
  double value = 0.0;
  bool relative = false;
  double at(double R) const { return relative ? value * R : value; }
  std::string label() const { return relative ? format_number(value) + "R" : format_number(value); }
};

struct ExhaustionOptions {
  int n_r = 32;
  int n_theta = 32;
  SolverOptions solver;
  double caccioppoli_eps = 1.0;
  double sobolev_radius = 1.0;
  double moser_radius = 0.5;
  std::vector<double> moser_centers{2.0, 3.0, 4.0};
  double moser_theta = 0.25 * std::numbers::pi;
  double decay_C = 1.0;
  /// Radius of the ball on which consecutive solutions are compared; 0
  /// selects half the first radius.
  double compact_radius = 0.0;
};

struct RadiusRecord {
  double R = 0.0;
  SolveReport solve;
  double u_min = 0.0;
  double u_max = 0.0;
  bool max_principle = true;
  std::vector<double> delta;
  Extended phi_integral;
  std::optional<double> budget;
  std::vector<CaccioppoliResult> caccioppoli;
  std::vector<MoserResult> moser;
};

struct ExhaustionReport {
  std::vector<double> schedule;
  std::vector<ProbeSpec> probes;
  double nu = 0.0;
  double compact_radius = 0.0;
  std::vector<RadiusRecord> records;
  /// sup over B(o, compact_radius) of |u_{k+1} - u_k|.
  std::vector<double> compact_distances;
  bool budget_divergent = false;
  bool all_converged() const {
    return std::all_of(records.begin(), records.end(), [](const RadiusRecord& r) { return r.solve.converged; });
  }
};

/// The two cutoffs used at each radius: a tent and a plateau, both vanishing
/// one unit inside the ball.
inline std::vector<RadialCutoff> standard_cutoffs(double R) {
  const double support = std::max(0.5 * R, R - 1.0);
  return {RadialCutoff::tent(support), RadialCutoff::plateau(0.5 * support, support)};
}

inline ExhaustionReport run_exhaustion(const JacobiSolution& jac, const BoundaryData& data,
                                       const std::vector<double>& schedule, const std::vector<ProbeSpec>& probes,
                                       const ExhaustionOptions& opt, const PhiFunction& phi, double nu) {
  if (schedule.empty()) throw std::invalid_argument("run_exhaustion: empty schedule");
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    if (!(schedule[k] > 0.0) || schedule[k] > jac.r_max()) throw std::invalid_argument("run_exhaustion: radius outside the Jacobi range");
    if (k > 0 && !(schedule[k] > schedule[k - 1])) throw std::invalid_argument("run_exhaustion: schedule must increase");
  }
  if (!(nu > 0.0)) throw std::invalid_argument("run_exhaustion: nu must be positive");
  const int n = jac.dimension();
  ExhaustionReport rep;
  rep.schedule = schedule;
  rep.probes = probes;
  rep.nu = nu;
  rep.compact_radius = opt.compact_radius > 0.0 ? opt.compact_radius : 0.5 * schedule.front();
  const auto& pair = phi.pair();
  const auto g1 = build_G1_F1(phi.density());

  std::vector<DiscreteField> fields;
  for (double R : schedule) {
    const auto grid = PolarGrid::assemble(jac, n, R, opt.n_r, opt.n_theta);
    DiscreteField field = solve_dirichlet(grid, data, std::nullopt, opt.solver);
    RadiusRecord rec;
    rec.R = R;
    rec.solve = field.report();
    rec.u_min = field.cell_min();
    rec.u_max = field.cell_max();
    rec.max_principle = rec.u_min >= data.min() - 1e-8 && rec.u_max <= data.max() + 1e-8;
    for (const auto& p : probes) {
      const double rho = p.at(R);
      rec.delta.push_back(rho <= R ? attainment_metric(field, data, rho) : kNaN);
    }
    rec.phi_integral = phi_integral(field, data, phi, nu);
    if (!rep.budget_divergent) {
      try {
        rec.budget = rhs_budget(jac, data, pair, g1, R).value;
      } catch (const HypothesisViolation&) {
        rep.budget_divergent = true;
      }
    }
    for (const auto& eta : standard_cutoffs(R))
      rec.caccioppoli.push_back(caccioppoli_check(field, data, eta, phi, nu, opt.caccioppoli_eps));
    for (double c : opt.moser_centers) {
      if (c + opt.moser_radius >= R) continue;
      rec.moser.push_back(
          moser_ratio(field, data, phi, nu, c, opt.moser_theta, opt.moser_radius, opt.sobolev_radius));
    }
    rep.records.push_back(std::move(rec));
    fields.push_back(std::move(field));
  }
  for (std::size_t k = 0; k + 1 < fields.size(); ++k) {
    const auto& inner = fields[k].grid();
    double worst = 0.0;
    for (int i = 0; i < inner.n_r() && inner.r()[i] <= rep.compact_radius; ++i)
      for (double th : inner.theta())
        worst = std::max(worst, std::abs(fields[k + 1].sample(inner.r()[i], th) - fields[k].sample(inner.r()[i], th)));
    worst = std::max(worst, std::abs(fields[k + 1].pole() - fields[k].pole()));
    rep.compact_distances.push_back(worst);
  }
  return rep;
}

struct HypothesisFlags {
  bool curvature_bound = false;
  bool dimension_gate = false;
};

struct ScenarioVerdict {
  HypothesisFlags gates;
  /// delta(final) / delta(initial) per probe; 0 when both vanish.
  std::vector<double> trend;
  double caccioppoli_log_margin = -kInf;  ///< max over checks of log(lhs / rhs)
  bool caccioppoli_holds = true;
  std::optional<double> fitted_c_integral;
  std::optional<double> fitted_c_moser;
  std::string verdict;
};

inline ScenarioVerdict classify(const ExhaustionReport& report, const HypothesisFlags& gates) {
  if (report.records.empty() || report.records.size() != report.schedule.size())
    throw std::invalid_argument("classify: incomplete report");
  ScenarioVerdict v;
  v.gates = gates;
  const auto& first = report.records.front();
  const auto& last = report.records.back();
  constexpr double tiny = 1e-12;
  bool decays = true;
  std::optional<bool> persists;
  for (std::size_t p = 0; p < report.probes.size(); ++p) {
    const double d0 = first.delta.at(p);
    const double d1 = last.delta.at(p);
    const double ratio = d0 <= tiny && d1 <= tiny ? 0.0 : d1 / d0;
    v.trend.push_back(ratio);
    if (!(d1 <= 0.5 * d0 || (d0 <= tiny && d1 <= tiny))) decays = false;
    if (report.probes[p].relative) persists = persists.value_or(true) && d1 >= 0.8 * d0 && d0 > tiny;
  }
  for (const auto& rec : report.records)
    for (const auto& c : rec.caccioppoli) {
      v.caccioppoli_log_margin = std::max(v.caccioppoli_log_margin, c.log_ratio);
      v.caccioppoli_holds = v.caccioppoli_holds && c.holds;
    }
  double c_int = -kInf, c_moser = -kInf;
  for (const auto& rec : report.records) {
    if (rec.budget) c_int = std::max(c_int, rec.phi_integral.log_value() - std::log1p(*rec.budget));
    for (const auto& m : rec.moser) c_moser = std::max(c_moser, m.log_ratio);
  }
  if (std::isfinite(c_int)) v.fitted_c_integral = std::exp(c_int);
  if (std::isfinite(c_moser)) v.fitted_c_moser = std::exp(c_moser);
  if (decays)
    v.verdict = "attainment-consistent";
  else if (persists.value_or(false))
    v.verdict = "non-attainment";
  else
    v.verdict = "inconclusive";
  return v;
}

/// {"X", "D", "log"}; non-finite entries become null.
inline nlohmann::ordered_json extended_json(const Extended& e) {
  auto num = [](double x) { return std::isfinite(x) ? nlohmann::ordered_json(x) : nlohmann::ordered_json(nullptr); };
  nlohmann::ordered_json j;
  j["X"] = num(e.X);
  j["D"] = num(e.D);
  j["log"] = num(e.log_value());
  return j;
}

inline nlohmann::ordered_json exhaustion_json(const ExhaustionReport& rep, const ScenarioVerdict& verdict,
                                              bool timing = false) {
  auto num = [](double x) { return std::isfinite(x) ? nlohmann::ordered_json(x) : nlohmann::ordered_json(nullptr); };
  nlohmann::ordered_json j;
  j["gates"] = {{"curvature_bound", verdict.gates.curvature_bound}, {"dimension_gate", verdict.gates.dimension_gate}};
  j["nu"] = rep.nu;
  j["compact_radius"] = rep.compact_radius;
  auto probes = nlohmann::ordered_json::array();
  for (const auto& p : rep.probes) probes.push_back(p.label());
  j["probes"] = probes;
  auto radii = nlohmann::ordered_json::array();
  for (const auto& rec : rep.records) {
    nlohmann::ordered_json r;
    r["R"] = rec.R;
    r["solve"] = solve_report_json(rec.solve, timing);
    r["u_min"] = rec.u_min;
    r["u_max"] = rec.u_max;
    r["max_principle"] = rec.max_principle;
    auto delta = nlohmann::ordered_json::array();
    for (double d : rec.delta) delta.push_back(num(d));
    r["delta"] = delta;
    r["phi_integral"] = extended_json(rec.phi_integral);
    r["rhs_budget"] = rec.budget ? nlohmann::ordered_json(*rec.budget) : nlohmann::ordered_json(nullptr);
    auto cac = nlohmann::ordered_json::array();
    for (const auto& c : rec.caccioppoli)
      cac.push_back({{"cutoff", c.cutoff},
                     {"lhs", extended_json(c.lhs)},
                     {"rhs", extended_json(c.rhs)},
                     {"log_ratio", num(c.log_ratio)},
                     {"holds", c.holds}});
    r["caccioppoli"] = cac;
    auto mos = nlohmann::ordered_json::array();
    for (const auto& m : rec.moser)
      mos.push_back({{"r", m.r}, {"theta", m.theta}, {"s", m.s}, {"ratio", m.ratio()}, {"log_ratio", num(m.log_ratio)}});
    r["moser"] = mos;
    radii.push_back(r);
  }
  j["radii"] = radii;
  auto dk = nlohmann::ordered_json::array();
  for (double d : rep.compact_distances) dk.push_back(num(d));
  j["compact_distances"] = dk;
  j["budget_divergent"] = rep.budget_divergent;
  nlohmann::ordered_json v;
  v["verdict"] = verdict.verdict;
  auto trend = nlohmann::ordered_json::array();
  for (double t : verdict.trend) trend.push_back(num(t));
  v["trend"] = trend;
  v["caccioppoli_holds"] = verdict.caccioppoli_holds;
  v["caccioppoli_log_margin"] = num(verdict.caccioppoli_log_margin);
  v["fitted_c_integral"] =
      verdict.fitted_c_integral ? nlohmann::ordered_json(*verdict.fitted_c_integral) : nlohmann::ordered_json(nullptr);
  v["fitted_c_moser"] =
      verdict.fitted_c_moser ? nlohmann::ordered_json(*verdict.fitted_c_moser) : nlohmann::ordered_json(nullptr);
  j["verdict"] = v;
  return j;
}

/// Rows R,rho,delta.
inline void write_attainment_csv(std::ostream& os, const ExhaustionReport& rep) {
  os << "R,rho,delta\n";
  for (const auto& rec : rep.records)
    for (std::size_t p = 0; p < rep.probes.size(); ++p)
      os << format_number(rec.R) << ',' << format_number(rep.probes[p].at(rec.R)) << ','
         << format_number(rec.delta[p]) << '\n';
}

}  // namespace hadamard
