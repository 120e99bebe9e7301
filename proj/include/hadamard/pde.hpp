#pragma once

// Finite-volume discretization of the minimal graph equation
//   div( grad u / sqrt(1 + |grad u|^2) ) = 0
// on geodesic balls and annuli of a model manifold, in polar coordinates
// (r, theta) with theta the polar angle on S^{n-1}. Data depend on theta only.

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hadamard/manifold.hpp"
#include "hadamard/numerics.hpp"
#include "json.hpp"

namespace hadamard {

/// Dirichlet data g(theta) on [0, pi] with its derivative.
class BoundaryData {
 public:
  BoundaryData(std::string name, std::function<double(double)> g, std::function<double(double)> dg)
      : name_(std::move(name)), g_(std::move(g)), dg_(std::move(dg)) {
    lo_ = kInf;
    hi_ = -kInf;
    lipschitz_ = 0.0;
    constexpr int samples = 4096;
    for (int k = 0; k <= samples; ++k) {
      const double th = std::numbers::pi * k / samples;
      const double v = g_(th);
      lo_ = std::min(lo_, v);
      hi_ = std::max(hi_, v);
      lipschitz_ = std::max(lipschitz_, std::abs(dg_(th)));
    }
  }

  static BoundaryData constant(double v) {
    return BoundaryData("constant", [v](double) { return v; }, [](double) { return 0.0; });
  }
  static BoundaryData cosine(double amplitude) {
    return BoundaryData("cosine", [amplitude](double th) { return amplitude * std::cos(th); },
                        [amplitude](double th) { return -amplitude * std::sin(th); });
  }
  static BoundaryData abs_cosine(double amplitude) {
    return BoundaryData(
        "abs_cosine", [amplitude](double th) { return amplitude * std::abs(std::cos(th)); },
        [amplitude](double th) { return std::cos(th) >= 0.0 ? -amplitude * std::sin(th) : amplitude * std::sin(th); });
  }
  /// amplitude * tanh((pi/2 - theta) / width): a smoothed jump across the equator.
  static BoundaryData smoothed_step(double amplitude, double width) {
    if (!(width > 0.0)) throw std::invalid_argument("smoothed_step: width must be positive");
    const double half = 0.5 * std::numbers::pi;
    return BoundaryData(
        "smoothed_step", [=](double th) { return amplitude * std::tanh((half - th) / width); },
        [=](double th) {
          const double c = std::cosh((half - th) / width);
          return -amplitude / (width * c * c);
        });
  }
  /// Piecewise-linear interpolation of (theta, g) samples covering [0, pi].
  static BoundaryData samples(std::vector<double> theta, std::vector<double> g) {
    if (theta.size() != g.size() || theta.size() < 2)
      throw std::invalid_argument("BoundaryData::samples: need at least two (theta, g) pairs");
    for (std::size_t i = 1; i < theta.size(); ++i)
      if (!(theta[i] > theta[i - 1])) throw std::invalid_argument("BoundaryData::samples: theta must increase");
    if (theta.front() > 1e-12 || theta.back() < std::numbers::pi - 1e-12)
      throw std::invalid_argument("BoundaryData::samples: theta must cover [0, pi]");
    auto locate = [theta](double th) {
      auto it = std::upper_bound(theta.begin(), theta.end(), th);
      std::size_t i = it == theta.begin() ? 0 : static_cast<std::size_t>(it - theta.begin()) - 1;
      return std::min(i, theta.size() - 2);
    };
    auto value = [theta, g, locate](double th) {
      const std::size_t i = locate(th);
      const double s = (th - theta[i]) / (theta[i + 1] - theta[i]);
      return g[i] + s * (g[i + 1] - g[i]);
    };
    auto slope = [theta, g, locate](double th) {
      const std::size_t i = locate(th);
      return (g[i + 1] - g[i]) / (theta[i + 1] - theta[i]);
    };
    return BoundaryData("samples", value, slope);
  }

  BoundaryData shifted(double c) const {
    auto g = g_;
    return BoundaryData(name_ + "+shift", [g, c](double th) { return g(th) + c; }, dg_);
  }

  const std::string& name() const { return name_; }
  double operator()(double theta) const { return g_(theta); }
  double derivative(double theta) const { return dg_(theta); }
  /// Lipschitz constant with respect to the angle, from a dense sample of g'.
  double lipschitz() const { return lipschitz_; }
  /// sup |g|.
  double bound() const { return std::max(std::abs(lo_), std::abs(hi_)); }
  double min() const { return lo_; }
  double max() const { return hi_; }

 private:
  std::string name_;
  std::function<double(double)> g_, dg_;
  double lo_, hi_, lipschitz_;
};

/// Cell-centered tensor grid in (r, theta). Ball mode has a pole cell of
/// radius h_r/2 around r = 0 and rings centered at (i+1) h_r; annulus mode
/// has rings centered at R_in + (i+1/2) h_r. Either way the outer Dirichlet
/// face sits at r = R.
class PolarGrid {
 public:
  static PolarGrid assemble(const JacobiSolution& jac, int n, double R, int n_r, int n_theta,
                            std::optional<double> R_in = std::nullopt) {
    if (n_r < 4 || n_theta < 4) throw std::invalid_argument("PolarGrid: resolution too coarse (need >= 4 cells)");
    if (n < 2) throw std::invalid_argument("PolarGrid: dimension must be >= 2");
    if (!(R > 0.0) || R > jac.r_max() * (1.0 + 1e-12))
      throw std::invalid_argument("PolarGrid: radius must lie in (0, r_max]");
    if (R_in && !(*R_in > 0.0 && *R_in < R)) throw std::invalid_argument("PolarGrid: need 0 < R_in < R");
    PolarGrid g;
    g.n_ = n;
    g.R_ = R;
    g.R_in_ = R_in;
    g.n_r_ = n_r;
    g.n_theta_ = n_theta;
    g.h_theta_ = std::numbers::pi / n_theta;
    if (R_in) {
      g.h_r_ = (R - *R_in) / n_r;
      for (int i = 0; i < n_r; ++i) g.r_.push_back(*R_in + (i + 0.5) * g.h_r_);
      for (int i = 0; i <= n_r; ++i) g.r_face_.push_back(*R_in + i * g.h_r_);
    } else {
      g.h_r_ = R / (n_r + 0.5);
      for (int i = 0; i < n_r; ++i) g.r_.push_back((i + 1) * g.h_r_);
      for (int i = 0; i <= n_r; ++i) g.r_face_.push_back((i + 0.5) * g.h_r_);
    }
    g.r_face_.back() = R;
    for (double r : g.r_) g.f_.push_back(jac.f(r));
    for (double r : g.r_face_) g.f_face_.push_back(jac.f(r));
    for (int j = 0; j < n_theta; ++j) {
      g.theta_.push_back((j + 0.5) * g.h_theta_);
      g.w_.push_back(std::pow(std::sin(g.theta_.back()), n - 2));
    }
    for (int j = 0; j <= n_theta; ++j) g.w_face_.push_back(std::pow(std::sin(j * g.h_theta_), n - 2));
    if (!R_in) {
      const double half = 0.5 * g.h_r_;
      const double radial =
          integrate([&](double r) { return std::pow(jac.f(r), n - 1); }, 0.0, half, 1e-13).value;
      double sphere = 0.0;
      for (double w : g.w_) sphere += w * g.h_theta_;
      g.pole_volume_ = radial * sphere;
    }
    return g;
  }

  int dimension() const { return n_; }
  bool annulus() const { return R_in_.has_value(); }
  double R() const { return R_; }
  double R_in() const { return R_in_.value_or(0.0); }
  int n_r() const { return n_r_; }
  int n_theta() const { return n_theta_; }
  double h_r() const { return h_r_; }
  double h_theta() const { return h_theta_; }
  const std::vector<double>& r() const { return r_; }
  const std::vector<double>& theta() const { return theta_; }
  /// Radial face i lies between ring i-1 and ring i; face 0 is the pole or
  /// inner face, face n_r the outer boundary.
  double r_face(int i) const { return r_face_[i]; }
  double f(int i) const { return f_[i]; }
  double f_face(int i) const { return f_face_[i]; }
  double w(int j) const { return w_[j]; }
  /// Angular weight at theta face j, i.e. at theta = j h_theta.
  double w_face(int j) const { return w_face_[j]; }

  std::size_t cell_count() const { return static_cast<std::size_t>(n_r_) * n_theta_; }
  int unknowns() const { return n_r_ * n_theta_ + (annulus() ? 0 : 1); }
  int pole_index() const { return annulus() ? -1 : 0; }
  int index(int i, int j) const { return (annulus() ? 0 : 1) + i * n_theta_ + j; }

  double volume(int i, int j) const {
    return std::pow(f_[i], n_ - 1) * w_[j] * h_r_ * h_theta_;
  }
  double pole_volume() const { return pole_volume_; }

  bool same_layout(const PolarGrid& o) const {
    return n_ == o.n_ && R_ == o.R_ && R_in_ == o.R_in_ && n_r_ == o.n_r_ && n_theta_ == o.n_theta_;
  }

 private:
  int n_ = 2;
  double R_ = 1.0;
  std::optional<double> R_in_;
  int n_r_ = 0, n_theta_ = 0;
  double h_r_ = 0.0, h_theta_ = 0.0;
  std::vector<double> r_, r_face_, f_, f_face_, theta_, w_, w_face_;
  double pole_volume_ = 0.0;
};

struct SolveReport {
  int iterations = 0;
  double residual_linf = kNaN;
  double residual_l2 = kNaN;
  /// Accepted step length per Newton iteration.
  std::vector<double> damping;
  int damping_steps = 0;
  int picard_sweeps = 0;
  bool used_harmonic_start = false;
  bool converged = false;
  /// l2 residual before each iteration and after the last.
  std::vector<double> residual_history;
  double wall_ms = 0.0;
  std::string message;
};

/// Cell values u of a solve (pole first in ball mode), with the data that
/// produced them.
class DiscreteField {
 public:
  DiscreteField(PolarGrid grid, BoundaryData outer, std::optional<BoundaryData> inner, std::vector<double> u)
      : grid_(std::move(grid)), outer_(std::move(outer)), inner_(std::move(inner)), u_(std::move(u)) {
    if (static_cast<int>(u_.size()) != grid_.unknowns()) throw std::invalid_argument("DiscreteField: size mismatch");
    if (grid_.annulus() && !inner_) throw std::invalid_argument("DiscreteField: annulus needs inner data");
  }

  const PolarGrid& grid() const { return grid_; }
  const BoundaryData& outer() const { return outer_; }
  const std::optional<BoundaryData>& inner() const { return inner_; }
  const std::vector<double>& values() const { return u_; }
  std::vector<double>& values() { return u_; }
  SolveReport& report() { return report_; }
  const SolveReport& report() const { return report_; }
  bool converged() const { return report_.converged; }

  double at(int i, int j) const { return u_[grid_.index(i, j)]; }
  double pole() const { return grid_.annulus() ? kNaN : u_[0]; }

  double cell_min() const { return *std::min_element(u_.begin(), u_.end()); }
  double cell_max() const { return *std::max_element(u_.begin(), u_.end()); }

  /// Bilinear interpolation between cell centers, extended to the Dirichlet
  /// faces by the data and across theta = 0, pi by even reflection.
  double sample(double r, double theta) const {
    const auto& th = grid_.theta();
    const int M = grid_.n_theta();
    double tj = std::clamp(theta, th.front(), th.back());
    int j = std::min(static_cast<int>((tj - th.front()) / grid_.h_theta()), M - 2);
    const double st = (tj - th[j]) / grid_.h_theta();
    auto column = [&](int i) { return (1 - st) * at(i, j) + st * at(i, j + 1); };
    auto data_at = [&](const BoundaryData& g) { return (1 - st) * g(th[j]) + st * g(th[j + 1]); };
    const auto& rr = grid_.r();
    const int N = grid_.n_r();
    if (r >= rr.back()) {
      const double s = std::min(1.0, (r - rr.back()) / (grid_.R() - rr.back()));
      return (1 - s) * column(N - 1) + s * data_at(outer_);
    }
    if (r <= rr.front()) {
      const double r0 = grid_.annulus() ? grid_.R_in() : 0.0;
      const double s = std::max(0.0, (r - r0) / (rr.front() - r0));
      const double inner_value = grid_.annulus() ? data_at(*inner_) : pole();
      return (1 - s) * inner_value + s * column(0);
    }
    int i = std::min(static_cast<int>(std::upper_bound(rr.begin(), rr.end(), r) - rr.begin()) - 1, N - 2);
    const double sr = (r - rr[i]) / (rr[i + 1] - rr[i]);
    return (1 - sr) * column(i) + sr * column(i + 1);
  }

 private:
  PolarGrid grid_;
  BoundaryData outer_;
  std::optional<BoundaryData> inner_;
  std::vector<double> u_;
  SolveReport report_;
};

struct ResidualNorms {
  double linf = 0.0;
  double l2 = 0.0;
};

namespace detail {

/// Affine form c0 + sum coef * u[index].
struct Stencil {
  double c0 = 0.0;
  std::vector<std::pair<int, double>> terms;

  Stencil& add(const Stencil& o, double s) {
    c0 += s * o.c0;
    for (const auto& [k, c] : o.terms) terms.emplace_back(k, s * c);
    return *this;
  }
  static Stencil unknown(int k) {
    Stencil s;
    s.terms.emplace_back(k, 1.0);
    return s;
  }
  static Stencil value(double v) {
    Stencil s;
    s.c0 = v;
    return s;
  }
  double eval(const std::vector<double>& u) const {
    double v = c0;
    for (const auto& [k, c] : terms) v += c * u[k];
    return v;
  }
};

/// Flux A * m_n a / sqrt(1 + m_n a^2 + m_t b^2) through one face, where a is
/// the normal and b the tangential coordinate derivative of u. `left` gains
/// the flux as outflow and `right` loses it; -1 marks a Dirichlet side.
struct Face {
  int left = -1;
  int right = -1;
  double area = 0.0;
  double m_normal = 1.0;
  double m_tangent = 1.0;
  Stencil normal;
  Stencil tangent;
};

struct Problem {
  std::vector<Face> faces;
  std::vector<double> inv_volume;
  int unknowns = 0;
};

inline Problem build_problem(const PolarGrid& g, const BoundaryData& outer, const std::optional<BoundaryData>& inner) {
  Problem p;
  const int N = g.n_r();
  const int M = g.n_theta();
  const int n = g.dimension();
  const double hr = g.h_r();
  const double ht = g.h_theta();
  p.unknowns = g.unknowns();
  p.inv_volume.assign(p.unknowns, 0.0);
  if (!g.annulus()) p.inv_volume[0] = 1.0 / g.pole_volume();
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < M; ++j) p.inv_volume[g.index(i, j)] = 1.0 / g.volume(i, j);

  auto u = [&](int i, int j) {
    j = std::clamp(j, 0, M - 1);
    return Stencil::unknown(g.index(i, j));
  };
  // Value on ring i in column j, i in [-1, N], with ghosts across Dirichlet faces.
  auto ring = [&](int i, int j) {
    const double th = g.theta()[j];
    if (i == -1) {
      if (!g.annulus()) return Stencil::unknown(0);
      return Stencil::value(2.0 * (*inner)(th)).add(u(0, j), -1.0);
    }
    if (i == N) return Stencil::value(2.0 * outer(th)).add(u(N - 1, j), -1.0);
    return u(i, j);
  };
  auto d_theta = [&](int i, int j) { return Stencil().add(u(i, j + 1), 0.5 / ht).add(u(i, j - 1), -0.5 / ht); };
  auto d_r = [&](int i, int j) { return Stencil().add(ring(i + 1, j), 0.5 / hr).add(ring(i - 1, j), -0.5 / hr); };

  for (int j = 0; j < M; ++j) {
    const double th = g.theta()[j];
    for (int i = 0; i <= N; ++i) {
      Face f;
      const double fr = g.f_face(i);
      f.area = std::pow(fr, n - 1) * g.w(j) * ht;
      f.m_normal = 1.0;
      f.m_tangent = 1.0 / (fr * fr);
      if (i == 0 && !g.annulus()) {
        f.left = 0;
        f.right = g.index(0, j);
        f.normal.add(u(0, j), 1.0 / hr).add(Stencil::unknown(0), -1.0 / hr);
        f.tangent.add(d_theta(0, j), 0.5);
      } else if (i == 0) {
        f.right = g.index(0, j);
        f.normal.add(u(0, j), 2.0 / hr).add(Stencil::value((*inner)(th)), -2.0 / hr);
        f.tangent = Stencil::value(inner->derivative(th));
      } else if (i == N) {
        f.left = g.index(N - 1, j);
        f.normal.add(Stencil::value(outer(th)), 2.0 / hr).add(u(N - 1, j), -2.0 / hr);
        f.tangent = Stencil::value(outer.derivative(th));
      } else {
        f.left = g.index(i - 1, j);
        f.right = g.index(i, j);
        f.normal.add(u(i, j), 1.0 / hr).add(u(i - 1, j), -1.0 / hr);
        f.tangent.add(d_theta(i - 1, j), 0.5).add(d_theta(i, j), 0.5);
      }
      p.faces.push_back(std::move(f));
    }
  }
  for (int i = 0; i < N; ++i) {
    const double fi = g.f(i);
    for (int j = 0; j + 1 < M; ++j) {
      Face f;
      f.left = g.index(i, j);
      f.right = g.index(i, j + 1);
      f.area = std::pow(fi, n - 1) * g.w_face(j + 1) * hr;
      f.m_normal = 1.0 / (fi * fi);
      f.m_tangent = 1.0;
      f.normal.add(u(i, j + 1), 1.0 / ht).add(u(i, j), -1.0 / ht);
      f.tangent.add(d_r(i, j), 0.5).add(d_r(i, j + 1), 0.5);
      p.faces.push_back(std::move(f));
    }
  }
  return p;
}

inline std::vector<double> evaluate_residual(const Problem& p, const std::vector<double>& u) {
  std::vector<double> res(p.unknowns, 0.0);
  for (const Face& f : p.faces) {
    const double a = f.normal.eval(u);
    const double b = f.tangent.eval(u);
    const double W = std::sqrt(1.0 + f.m_normal * a * a + f.m_tangent * b * b);
    const double flux = f.area * f.m_normal * a / W;
    if (f.left >= 0) res[f.left] += flux;
    if (f.right >= 0) res[f.right] -= flux;
  }
  for (int k = 0; k < p.unknowns; ++k) res[k] *= p.inv_volume[k];
  return res;
}

inline ResidualNorms norms(const std::vector<double>& r) {
  ResidualNorms out;
  double sq = 0.0;
  for (double v : r) {
    out.linf = std::max(out.linf, std::abs(v));
    sq += v * v;
  }
  out.l2 = std::sqrt(sq);
  return out;
}

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Newton Jacobian of the residual at u.
inline SparseMatrix jacobian(const Problem& p, const std::vector<double>& u) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(p.faces.size() * 24);
  for (const Face& f : p.faces) {
    const double a = f.normal.eval(u);
    const double b = f.tangent.eval(u);
    const double W2 = 1.0 + f.m_normal * a * a + f.m_tangent * b * b;
    const double W3 = W2 * std::sqrt(W2);
    const double dqa = f.area * f.m_normal * (1.0 + f.m_tangent * b * b) / W3;
    const double dqb = -f.area * f.m_normal * a * f.m_tangent * b / W3;
    auto put = [&](int k, double d) {
      if (f.left >= 0) trip.emplace_back(f.left, k, d * p.inv_volume[f.left]);
      if (f.right >= 0) trip.emplace_back(f.right, k, -d * p.inv_volume[f.right]);
    };
    for (const auto& [k, c] : f.normal.terms) put(k, dqa * c);
    for (const auto& [k, c] : f.tangent.terms) put(k, dqb * c);
  }
  SparseMatrix J(p.unknowns, p.unknowns);
  J.setFromTriplets(trip.begin(), trip.end());
  return J;
}

/// Linear operator with the coefficient 1/W frozen at u (W = 1 when u is
/// empty); returns (matrix, constant part) of the residual.
inline std::pair<SparseMatrix, Eigen::VectorXd> frozen_operator(const Problem& p, const std::vector<double>& u) {
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(p.unknowns);
  for (const Face& f : p.faces) {
    double W = 1.0;
    if (!u.empty()) {
      const double a = f.normal.eval(u);
      const double b = f.tangent.eval(u);
      W = std::sqrt(1.0 + f.m_normal * a * a + f.m_tangent * b * b);
    }
    const double s = f.area * f.m_normal / W;
    if (f.left >= 0) c[f.left] += s * f.normal.c0 * p.inv_volume[f.left];
    if (f.right >= 0) c[f.right] -= s * f.normal.c0 * p.inv_volume[f.right];
    for (const auto& [k, coef] : f.normal.terms) {
      if (f.left >= 0) trip.emplace_back(f.left, k, s * coef * p.inv_volume[f.left]);
      if (f.right >= 0) trip.emplace_back(f.right, k, -s * coef * p.inv_volume[f.right]);
    }
  }
  SparseMatrix A(p.unknowns, p.unknowns);
  A.setFromTriplets(trip.begin(), trip.end());
  return {std::move(A), std::move(c)};
}

inline std::optional<Eigen::VectorXd> sparse_solve(const SparseMatrix& A, const Eigen::VectorXd& rhs) {
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) return std::nullopt;
  Eigen::VectorXd x = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !x.allFinite()) return std::nullopt;
  return x;
}

inline std::optional<std::vector<double>> frozen_solve(const Problem& p, const std::vector<double>& u) {
  auto [A, c] = frozen_operator(p, u);
  auto x = sparse_solve(A, -c);
  if (!x) return std::nullopt;
  return std::vector<double>(x->data(), x->data() + x->size());
}

}  // namespace detail

/// Norms of the volume-normalized finite-volume divergence of
/// f^{n-1} w(theta) grad u / sqrt(1 + |grad u|^2) over every cell.
inline ResidualNorms residual(const DiscreteField& field) {
  const auto p = detail::build_problem(field.grid(), field.outer(), field.inner());
  return detail::norms(detail::evaluate_residual(p, field.values()));
}

/// Field holding u(r, theta) sampled at the cell centers (pole at r = 0).
inline DiscreteField make_field(const PolarGrid& grid, const BoundaryData& outer,
                                const std::optional<BoundaryData>& inner,
                                const std::function<double(double, double)>& u) {
  std::vector<double> v(grid.unknowns());
  if (!grid.annulus()) v[0] = u(0.0, 0.5 * std::numbers::pi);
  for (int i = 0; i < grid.n_r(); ++i)
    for (int j = 0; j < grid.n_theta(); ++j) v[grid.index(i, j)] = u(grid.r()[i], grid.theta()[j]);
  return DiscreteField(grid, outer, inner, std::move(v));
}

struct SolverOptions {
  double tol = 1e-10;
  int max_iter = 50;
  int picard_sweeps = 20;
};

/// Damped Newton solve of the Dirichlet problem with u = outer on r = R and
/// u = inner on r = R_in (annulus). Non-convergence is reported in the
/// field's report rather than thrown; a failed linear solve throws.
inline DiscreteField solve_dirichlet(const PolarGrid& grid, const BoundaryData& outer,
                                     const std::optional<BoundaryData>& inner = std::nullopt,
                                     const SolverOptions& opt = {}) {
  if (grid.annulus() && !inner) throw std::invalid_argument("solve_dirichlet: annulus needs inner data");
  const auto start = std::chrono::steady_clock::now();
  const auto p = detail::build_problem(grid, outer, inner);

  // Radial extension of the data (blended across an annulus).
  std::vector<double> u(grid.unknowns());
  if (!grid.annulus()) {
    double num = 0.0, den = 0.0;
    for (int j = 0; j < grid.n_theta(); ++j) {
      num += grid.w(j) * outer(grid.theta()[j]);
      den += grid.w(j);
    }
    u[0] = num / den;
  }
  for (int i = 0; i < grid.n_r(); ++i) {
    const double s = grid.annulus() ? (grid.r()[i] - grid.R_in()) / (grid.R() - grid.R_in()) : 1.0;
    for (int j = 0; j < grid.n_theta(); ++j) {
      const double th = grid.theta()[j];
      u[grid.index(i, j)] = grid.annulus() ? (1 - s) * (*inner)(th) + s * outer(th) : outer(th);
    }
  }

  SolveReport rep;
  auto res = detail::evaluate_residual(p, u);
  auto nrm = detail::norms(res);
  if (nrm.linf > opt.tol) {
    auto harmonic = detail::frozen_solve(p, {});
    if (!harmonic) throw NumericalError("solve_dirichlet: harmonic start failed");
    auto hres = detail::evaluate_residual(p, *harmonic);
    auto hn = detail::norms(hres);
    if (hn.l2 < nrm.l2) {
      u = std::move(*harmonic);
      res = std::move(hres);
      nrm = hn;
      rep.used_harmonic_start = true;
    }
  }

  auto picard = [&]() {
    for (int s = 0; s < opt.picard_sweeps && nrm.linf > opt.tol; ++s) {
      auto next = detail::frozen_solve(p, u);
      if (!next) throw NumericalError("solve_dirichlet: Picard linear solve failed");
      u = std::move(*next);
      res = detail::evaluate_residual(p, u);
      nrm = detail::norms(res);
      ++rep.picard_sweeps;
    }
  };

  bool picard_used = false;
  rep.residual_history.push_back(nrm.l2);
  for (int it = 0; it < opt.max_iter && nrm.linf > opt.tol; ++it) {
    ++rep.iterations;
    const auto J = detail::jacobian(p, u);
    Eigen::VectorXd rhs(p.unknowns);
    for (int k = 0; k < p.unknowns; ++k) rhs[k] = -res[k];
    auto du = detail::sparse_solve(J, rhs);
    if (!du) throw NumericalError("solve_dirichlet: Newton linear solve failed");
    double alpha = 1.0;
    bool accepted = false;
    std::vector<double> trial(u.size());
    for (int k = 0; k < 30; ++k) {
      for (std::size_t q = 0; q < u.size(); ++q) trial[q] = u[q] + alpha * (*du)[q];
      auto tres = detail::evaluate_residual(p, trial);
      auto tn = detail::norms(tres);
      if (std::isfinite(tn.l2) && tn.l2 <= (1.0 - 1e-4 * alpha) * nrm.l2) {
        u.swap(trial);
        res = std::move(tres);
        nrm = tn;
        accepted = true;
        break;
      }
      alpha *= 0.5;
      ++rep.damping_steps;
    }
    if (accepted) {
      rep.damping.push_back(alpha);
    } else {
      // No descent: one round of frozen-coefficient sweeps, then give up.
      rep.damping.push_back(0.0);
      if (picard_used) break;
      picard_used = true;
      picard();
    }
    rep.residual_history.push_back(nrm.l2);
  }

  rep.residual_linf = nrm.linf;
  rep.residual_l2 = nrm.l2;
  rep.converged = nrm.linf <= opt.tol;
  if (!rep.converged) rep.message = "residual " + format_number(nrm.linf) + " above tolerance";
  rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  DiscreteField field(grid, outer, inner, std::move(u));
  field.report() = std::move(rep);
  return field;
}

/// sup over cells |u_A - u_B| minus sup over Dirichlet nodes |g_A - g_B|.
inline double comparison_check(const DiscreteField& a, const DiscreteField& b) {
  if (!a.grid().same_layout(b.grid())) throw std::invalid_argument("comparison_check: grids differ");
  double cells = 0.0;
  for (std::size_t k = 0; k < a.values().size(); ++k)
    cells = std::max(cells, std::abs(a.values()[k] - b.values()[k]));
  double data = 0.0;
  for (double th : a.grid().theta()) {
    data = std::max(data, std::abs(a.outer()(th) - b.outer()(th)));
    if (a.inner() && b.inner()) data = std::max(data, std::abs((*a.inner())(th) - (*b.inner())(th)));
  }
  return cells - data;
}

/// max |u(i, j) - u(i, M-1-j)|.
inline double mirror_asymmetry(const DiscreteField& field) {
  const auto& g = field.grid();
  double worst = 0.0;
  for (int i = 0; i < g.n_r(); ++i)
    for (int j = 0; j < g.n_theta(); ++j)
      worst = std::max(worst, std::abs(field.at(i, j) - field.at(i, g.n_theta() - 1 - j)));
  return worst;
}

/// Total discrete flux through each radial face, normalized by the angular
/// measure sum_j w(theta_j) h_theta. For radial data on an annulus this is
/// the first integral f^{n-1} u' / sqrt(1 + u'^2).
inline std::vector<double> ring_fluxes(const DiscreteField& field) {
  const auto& g = field.grid();
  const auto p = detail::build_problem(g, field.outer(), field.inner());
  const int N = g.n_r();
  std::vector<double> total(N + 1, 0.0);
  double sphere = 0.0;
  for (int j = 0; j < g.n_theta(); ++j) sphere += g.w(j) * g.h_theta();
  const auto& u = field.values();
  for (int j = 0; j < g.n_theta(); ++j) {
    for (int i = 0; i <= N; ++i) {
      const detail::Face& f = p.faces[static_cast<std::size_t>(j) * (N + 1) + i];
      const double a = f.normal.eval(u);
      const double b = f.tangent.eval(u);
      total[i] += f.area * a / std::sqrt(1.0 + a * a + f.m_tangent * b * b);
    }
  }
  for (double& t : total) t /= sphere;
  return total;
}

/// Rotationally symmetric solution on [R_in, R_out] from the first integral
/// f^{n-1} u' / sqrt(1 + u'^2) = c. Stored in s = sqrt(r - R_in), where the
/// profile stays smooth even when u' blows up at R_in.
class RadialProfile {
 public:
  RadialProfile(double c, double R_in, double R_out, std::vector<double> s, std::vector<double> u,
                std::vector<double> du_ds)
      : c_(c), R_in_(R_in), R_out_(R_out), s_(std::move(s)), u_(std::move(u)), du_ds_(std::move(du_ds)) {}

  double flux_constant() const { return c_; }
  double R_in() const { return R_in_; }
  double R_out() const { return R_out_; }

  double operator()(double r) const {
    const double s = std::sqrt(std::clamp(r - R_in_, 0.0, R_out_ - R_in_));
    const std::size_t k = locate(s);
    return hermite(s, s_[k], s_[k + 1], u_[k], u_[k + 1], du_ds_[k], du_ds_[k + 1]);
  }

  double derivative(double r) const {
    const double s = std::sqrt(std::clamp(r - R_in_, 0.0, R_out_ - R_in_));
    if (s == 0.0) return c_ == 0.0 ? 0.0 : std::copysign(kInf, c_);
    const std::size_t k = locate(s);
    return hermite_slope(s, s_[k], s_[k + 1], u_[k], u_[k + 1], du_ds_[k], du_ds_[k + 1]) / (2.0 * s);
  }

 private:
  std::size_t locate(double s) const {
    auto it = std::upper_bound(s_.begin(), s_.end(), s);
    std::size_t k = it == s_.begin() ? 0 : static_cast<std::size_t>(it - s_.begin()) - 1;
    return std::min(k, s_.size() - 2);
  }

  double c_, R_in_, R_out_;
  std::vector<double> s_, u_, du_ds_;
};

/// Shoots on the flux constant c so that
///   v_out - v_in = int_{R_in}^{R_out} c / sqrt(F^2 - c^2) dr,  F = f^{n-1}.
/// Admissible |c| <= F(R_in); the endpoint value gives a vertical tangent at R_in.
inline RadialProfile radial_oracle(const JacobiSolution& jac, int n, double R_in, double R_out, double v_in,
                                   double v_out, int nodes = 400) {
  if (!(R_in > 0.0 && R_in < R_out && R_out <= jac.r_max() * (1.0 + 1e-12)))
    throw std::invalid_argument("radial_oracle: need 0 < R_in < R_out <= r_max");
  const double F_in = std::pow(jac.f(R_in), n - 1);
  const double dF_in = (n - 1) * std::pow(jac.f(R_in), n - 2) * jac.fprime(R_in);
  const double S = std::sqrt(R_out - R_in);
  auto F = [&](double r) { return std::pow(jac.f(r), n - 1); };
  auto dF = [&](double r) { return (n - 1) * std::pow(jac.f(r), n - 2) * jac.fprime(r); };
  // F(R_in + tau) - F(R_in); short steps integrate F' to avoid cancellation.
  auto rise = [&](double tau) {
    if (tau >= 1e-3) return F(R_in + tau) - F_in;
    static constexpr double x[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                                    0.9602898564975363};
    static constexpr double w[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                                    0.1012285362903763};
    double sum = 0.0;
    for (int k = 0; k < 4; ++k)
      sum += w[k] * (dF(R_in + 0.5 * tau * (1 - x[k])) + dF(R_in + 0.5 * tau * (1 + x[k])));
    return 0.5 * tau * sum;
  };
  // u'(r) dr in the s variable, for c >= 0.
  auto integrand = [&](double c, double s) {
    if (c == 0.0) return 0.0;
    const double up = rise(s * s);
    const double gap = (F_in - c) + up;
    if (gap <= 0.0) return 2.0 * c / std::sqrt(2.0 * c * dF_in);
    return 2.0 * s * c / std::sqrt(gap * (F_in + up + c));
  };
  auto rise_of = [&](double c, double s0, double s1) {
    return integrate_segments([&](double s) { return integrand(c, s); }, {s0, s1}, 1e-12);
  };
  const double target = std::abs(v_out - v_in);
  const double sign = v_out >= v_in ? 1.0 : -1.0;
  double c = 0.0;
  if (target > 0.0) {
    const double max_rise = rise_of(F_in, 0.0, S);
    if (target > max_rise * (1.0 + 1e-10))
      throw std::domain_error("radial_oracle: no admissible flux constant (|c| must stay below min f^{n-1})");
    if (target >= max_rise * (1.0 - 1e-13))
      c = F_in;
    else
      c = solve_increasing([&](double cc) { return rise_of(cc, 0.0, S) - target; }, 0.0, F_in, {}, 1e-15);
  }
  std::vector<double> s(nodes + 1), u(nodes + 1), du(nodes + 1);
  for (int k = 0; k <= nodes; ++k) {
    s[k] = S * k / nodes;
    du[k] = sign * (k == 0 ? (c == F_in && c > 0.0 ? std::sqrt(2.0 * c / dF_in) : 0.0) : integrand(c, s[k]));
    u[k] = k == 0 ? v_in : u[k - 1] + sign * rise_of(c, s[k - 1], s[k]);
  }
  return RadialProfile(sign * c, R_in, R_out, std::move(s), std::move(u), std::move(du));
}

/// Rows r,theta,u at the cell centers (pole first, at r = 0, theta = 0).
inline void write_field_csv(std::ostream& os, const DiscreteField& field) {
  const auto& g = field.grid();
  os << "r,theta,u\n";
  if (!g.annulus()) os << "0,0," << format_number(field.pole()) << '\n';
  for (int i = 0; i < g.n_r(); ++i)
    for (int j = 0; j < g.n_theta(); ++j)
      os << format_number(g.r()[i]) << ',' << format_number(g.theta()[j]) << ',' << format_number(field.at(i, j))
         << '\n';
}

/// Solve report; wall_ms is null unless timing is requested so that repeated
/// runs produce identical files.
inline nlohmann::ordered_json solve_report_json(const SolveReport& rep, bool timing = false) {
  nlohmann::ordered_json j;
  j["iterations"] = rep.iterations;
  j["residual_linf"] = rep.residual_linf;
  j["residual_l2"] = rep.residual_l2;
  j["damping_steps"] = rep.damping_steps;
  j["wall_ms"] = timing ? nlohmann::ordered_json(rep.wall_ms) : nlohmann::ordered_json(nullptr);
  j["converged"] = rep.converged;
  j["picard_sweeps"] = rep.picard_sweeps;
  j["damping"] = rep.damping;
  j["residual_history"] = rep.residual_history;
  if (!rep.message.empty()) j["message"] = rep.message;
  return j;
}

}  // namespace hadamard
