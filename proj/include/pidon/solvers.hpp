#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pidon/errors.hpp"
#include "pidon/problem_spec.hpp"

namespace pidon {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct OdeSystem {
  int n = 1;
  std::function<Vec(double, const Vec&)> f;
  std::function<Mat(double, const Vec&)> jacobian;  // optional
};

/// Accepted solver steps with the right-hand side at each step, which is
/// enough for cubic Hermite dense output.
struct SolveResult {
  std::vector<double> t;
  std::vector<Vec> s;
  std::vector<Vec> ds;
  long accepted = 0;
  long rejected = 0;
  double rtol = 0.0;
  double atol = 0.0;

  const Vec& final_state() const { return s.back(); }

  Vec at(double tq) const {
    if (t.empty()) throw ShapeError("empty solve result");
    if (tq <= t.front()) return s.front();
    if (tq >= t.back()) return s.back();
    const auto it = std::upper_bound(t.begin(), t.end(), tq);
    const auto i = static_cast<std::size_t>(it - t.begin()) - 1;
    const double h = t[i + 1] - t[i];
    const double th = (tq - t[i]) / h;
    const double h00 = (1 + 2 * th) * (1 - th) * (1 - th), h10 = th * (1 - th) * (1 - th);
    const double h01 = th * th * (3 - 2 * th), h11 = th * th * (th - 1);
    return h00 * s[i] + h10 * h * ds[i] + h01 * s[i + 1] + h11 * h * ds[i + 1];
  }

  /// Dense output on a grid (rows = times, cols = components).
  Mat sample(const std::vector<double>& grid) const {
    Mat out(static_cast<Eigen::Index>(grid.size()), s.front().size());
    for (std::size_t k = 0; k < grid.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = at(grid[k]).transpose();
    return out;
  }
};

namespace detail {

inline double error_norm(const Vec& err, const Vec& y0, const Vec& y1, double rtol, double atol) {
  const Vec sc = (atol + rtol * y0.cwiseAbs().cwiseMax(y1.cwiseAbs()).array()).matrix();
  return std::sqrt((err.cwiseQuotient(sc)).squaredNorm() / static_cast<double>(err.size()));
}

inline void check_solve_args(const OdeSystem& sys, const Vec& s0, double T, double rtol, double atol) {
  if (!(rtol > 0.0) || !(atol > 0.0)) throw ConfigError("solver tolerances must be positive");
  if (!(T > 0.0)) throw ConfigError("integration end time must be positive");
  if (s0.size() != sys.n) throw ShapeError("initial state has wrong dimension");
}

inline double initial_step(const OdeSystem& sys, const Vec& s0, const Vec& f0, double T, double rtol, double atol,
                           int order) {
  const Vec sc = (atol + rtol * s0.cwiseAbs().array()).matrix();
  const double d0 = std::sqrt(s0.cwiseQuotient(sc).squaredNorm() / sys.n);
  const double d1 = std::sqrt(f0.cwiseQuotient(sc).squaredNorm() / sys.n);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, T);
  const Vec f1 = sys.f(h0, s0 + h0 * f0);
  const double d2 = std::sqrt((f1 - f0).cwiseQuotient(sc).squaredNorm() / sys.n) / h0;
  const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                             : std::pow(0.01 / std::max(d1, d2), 1.0 / (order + 1));
  return std::min({100 * h0, h1, T});
}

}  // namespace detail

/// Dormand-Prince 5(4) with PI step-size control.
inline SolveResult rk_adaptive(const OdeSystem& sys, const Vec& s0, double T, double rtol = 1e-8,
                               double atol = 1e-10, long max_steps = 10'000'000) {
  detail::check_solve_args(sys, s0, T, rtol, atol);
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;

  SolveResult r;
  r.rtol = rtol;
  r.atol = atol;
  double t = 0.0;
  Vec y = s0;
  Vec k1 = sys.f(t, y);
  r.t.push_back(t);
  r.s.push_back(y);
  r.ds.push_back(k1);
  double h = detail::initial_step(sys, y, k1, T, rtol, atol, 4);
  double err_prev = 1e-4;
  bool last_rejected = false;

  while (t < T) {
    if (r.accepted + r.rejected >= max_steps) throw StiffnessSuspectedError("rk_adaptive: step budget exhausted");
    if (h < 1e-14 * T)
      throw StiffnessSuspectedError("rk_adaptive: step size underflow at t = " + std::to_string(t) +
                                    "; the problem looks stiff, use stiff_implicit");
    if (t + h > T) h = T - t;
    const Vec k2 = sys.f(t + c2 * h, y + h * a21 * k1);
    const Vec k3 = sys.f(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
    const Vec k4 = sys.f(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vec k5 = sys.f(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vec k6 = sys.f(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Vec y1 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Vec k7 = sys.f(t + h, y1);
    const Vec e = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double err = detail::error_norm(e, y, y1, rtol, atol);
    if (!std::isfinite(err)) {
      ++r.rejected;
      h *= 0.2;
      last_rejected = true;
      continue;
    }
    if (err <= 1.0) {
      // PI controller (Gustafsson) with the usual DOPRI exponents.
      double fac = 0.9 * std::pow(err, -0.7 / 5) * std::pow(err_prev, 0.4 / 5);
      fac = std::clamp(fac, 0.2, 10.0);
      if (last_rejected) fac = std::min(fac, 1.0);
      t = (T - (t + h) < 1e-12 * T) ? T : t + h;
      y = y1;
      k1 = k7;
      r.t.push_back(t);
      r.s.push_back(y);
      r.ds.push_back(k1);
      ++r.accepted;
      err_prev = std::max(err, 1e-4);
      h *= fac;
      last_rejected = false;
    } else {
      ++r.rejected;
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      last_rejected = true;
    }
  }
  return r;
}

/// TR-BDF2: a trapezoidal stage to t + gamma h followed by BDF2, gamma =
/// 2 - sqrt(2). Both stages share the Newton matrix I - d h J, d = gamma/2.
/// Error estimate from the embedded third-order weights, filtered through
/// the same matrix so it stays bounded on stiff components.
inline SolveResult stiff_implicit(const OdeSystem& sys, const Vec& s0, double T, double rtol = 1e-6,
                                  double atol = 1e-10, long max_steps = 10'000'000) {
  detail::check_solve_args(sys, s0, T, rtol, atol);
  const double gamma = 2.0 - std::sqrt(2.0);
  const double d = gamma / 2.0;
  const double w = std::sqrt(2.0) / 4.0;
  // b - bhat for the three stage derivatives (f_n, f_gamma, f_{n+1}).
  const double eb1 = w - (1.0 - w) / 3.0, eb2 = w - (3.0 * w + 1.0) / 3.0, eb3 = d - d / 3.0;

  auto jac = [&](double t, const Vec& y) -> Mat {
    if (sys.jacobian) return sys.jacobian(t, y);
    Mat J(sys.n, sys.n);
    const Vec f0 = sys.f(t, y);
    for (int j = 0; j < sys.n; ++j) {
      Vec yp = y;
      const double dh = 1e-7 * std::max(1.0, std::abs(y(j)));
      yp(j) += dh;
      J.col(j) = (sys.f(t, yp) - f0) / dh;
    }
    return J;
  };

  SolveResult r;
  r.rtol = rtol;
  r.atol = atol;
  double t = 0.0;
  Vec y = s0;
  Vec fn = sys.f(t, y);
  r.t.push_back(t);
  r.s.push_back(y);
  r.ds.push_back(fn);
  double h = detail::initial_step(sys, y, fn, T, rtol, atol, 2);

  // Simplified Newton for z - d h f(tz, z) = rhs. Returns nullopt on failure.
  auto newton = [&](const Eigen::PartialPivLU<Mat>& lu, double tz, const Vec& rhs, Vec z,
                    const Vec& scale) -> std::optional<Vec> {
    double prev = 0.0;
    for (int it = 0; it < 10; ++it) {
      const Vec g = z - d * h * sys.f(tz, z) - rhs;
      const Vec dz = lu.solve(-g);
      z += dz;
      const double nrm = std::sqrt(dz.cwiseQuotient(scale).squaredNorm() / sys.n);
      if (!std::isfinite(nrm)) return std::nullopt;
      if (nrm < 1e-3) return z;
      if (it > 0 && nrm > 0.9 * prev) return std::nullopt;
      prev = nrm;
    }
    return std::nullopt;
  };

  while (t < T) {
    if (r.accepted + r.rejected >= max_steps) throw NewtonFailureError("stiff_implicit: step budget exhausted", r.accepted);
    if (t + h > T) h = T - t;
    if (h < 1e-12)
      throw NewtonFailureError("stiff_implicit: step size fell below 1e-12 at t = " + std::to_string(t), r.accepted);
    const Mat J = jac(t, y);
    const Eigen::PartialPivLU<Mat> lu(Mat::Identity(sys.n, sys.n) - d * h * J);
    const Vec scale = (atol + rtol * y.cwiseAbs().array()).matrix();

    const auto zg = newton(lu, t + gamma * h, y + d * h * fn, y + gamma * h * fn, scale);
    if (!zg) {
      ++r.rejected;
      h *= 0.5;
      continue;
    }
    const Vec fg = sys.f(t + gamma * h, *zg);
    const Vec pred = y + h * (w * fn + w * fg + d * fg);
    const auto y1 = newton(lu, t + h, y + w * h * (fn + fg), pred, scale);
    if (!y1) {
      ++r.rejected;
      h *= 0.5;
      continue;
    }
    const Vec f1 = sys.f(t + h, *y1);
    const Vec e = lu.solve(h * (eb1 * fn + eb2 * fg + eb3 * f1));
    const double err = detail::error_norm(e, y, *y1, rtol, atol);
    if (err <= 1.0) {
      t = (T - (t + h) < 1e-12 * T) ? T : t + h;
      y = *y1;
      fn = f1;
      r.t.push_back(t);
      r.s.push_back(y);
      r.ds.push_back(fn);
      ++r.accepted;
      h *= std::clamp(0.9 * std::pow(std::max(err, 1e-10), -1.0 / 3.0), 0.2, 5.0);
    } else {
      ++r.rejected;
      h *= std::clamp(0.9 * std::pow(err, -1.0 / 3.0), 0.2, 0.9);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Benchmark right-hand sides.

inline OdeSystem pendulum_system(const ProblemSpec& p) {
  const double damping = p.constant("b") / p.constant("m");
  const double gravity = p.constant("g") / p.constant("L");
  OdeSystem sys;
  sys.n = 2;
  sys.f = [=](double, const Vec& s) {
    Vec d(2);
    d << s(1), -damping * s(1) - gravity * std::sin(s(0));
    return d;
  };
  sys.jacobian = [=](double, const Vec& s) {
    Mat J(2, 2);
    J << 0.0, 1.0, -gravity * std::cos(s(0)), -damping;
    return J;
  };
  return sys;
}

inline OdeSystem robertson_system(const ProblemSpec& p) {
  const double k1 = p.constant("k1"), k2 = p.constant("k2"), k3 = p.constant("k3");
  OdeSystem sys;
  sys.n = 3;
  sys.f = [=](double, const Vec& s) {
    Vec d(3);
    d << -k1 * s(0) + k3 * s(1) * s(2), k1 * s(0) - k2 * s(1) * s(1) - k3 * s(1) * s(2), k2 * s(1) * s(1);
    return d;
  };
  sys.jacobian = [=](double, const Vec& s) {
    Mat J(3, 3);
    J << -k1, k3 * s(2), k3 * s(1),
         k1, -2.0 * k2 * s(1) - k3 * s(2), -k3 * s(1),
         0.0, 2.0 * k2 * s(1), 0.0;
    return J;
  };
  return sys;
}

// ---------------------------------------------------------------------------
// Diffusion-reaction s_t = D s_xx + k s^2 on [lo, hi] with zero Dirichlet
// boundaries: Crank-Nicolson in time, central differences in space, Newton
// with tridiagonal solves for the implicit half.

/// Space-time field on a uniform grid: values(i, j) = s(x_j, t_i).
struct SpaceTimeField {
  std::vector<double> x;
  std::vector<double> t;
  Mat values;
};

namespace detail {

// Solves a tridiagonal system in place; sub/diag/sup have length n (sub[0]
// and sup[n-1] unused).
inline void thomas(std::vector<double> sub, std::vector<double> diag, std::vector<double> sup,
                   std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double m = sub[i] / diag[i - 1];
    diag[i] -= m * sup[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  rhs[n - 1] /= diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
}

}  // namespace detail

inline SpaceTimeField fd_diffusion_reaction(const std::vector<double>& u0, double D, double k, double T,
                                            double dt, Interval space = {0.0, 1.0}) {
  const std::size_t nx = u0.size();
  if (nx < 3) throw ConfigError("fd_diffusion_reaction: need at least 3 grid points");
  if (!(dt > 0.0) || !(T > 0.0)) throw ConfigError("fd_diffusion_reaction: dt and T must be positive");
  const auto steps = static_cast<long>(std::llround(T / dt));
  if (steps < 1 || std::abs(static_cast<double>(steps) * dt - T) > 1e-9 * T)
    throw ConfigError("fd_diffusion_reaction: T must be a multiple of dt");
  const double dx = space.width() / static_cast<double>(nx - 1);
  const double r = D * dt / (dx * dx);
  const std::size_t n = nx - 2;  // interior unknowns

  SpaceTimeField out;
  for (std::size_t j = 0; j < nx; ++j) out.x.push_back(space.lo + dx * static_cast<double>(j));
  out.values.resize(steps + 1, static_cast<Eigen::Index>(nx));
  std::vector<double> u = u0;
  u.front() = u.back() = 0.0;
  out.t.push_back(0.0);
  for (std::size_t j = 0; j < nx; ++j) out.values(0, static_cast<Eigen::Index>(j)) = u[j];

  std::vector<double> rhs0(n), v(n), g(n), sub(n), diag(n), sup(n);
  for (long step = 1; step <= steps; ++step) {
    // Explicit half: u + dt/2 (D lap u + k u^2).
    for (std::size_t i = 0; i < n; ++i) {
      const double ui = u[i + 1];
      rhs0[i] = ui + 0.5 * r * (u[i] - 2.0 * ui + u[i + 2]) + 0.5 * dt * k * ui * ui;
      v[i] = ui;
    }
    bool converged = false;
    for (int it = 0; it < 30; ++it) {
      double vmax = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double left = i > 0 ? v[i - 1] : 0.0;
        const double right = i + 1 < n ? v[i + 1] : 0.0;
        g[i] = -(v[i] - 0.5 * r * (left - 2.0 * v[i] + right) - 0.5 * dt * k * v[i] * v[i] - rhs0[i]);
        sub[i] = -0.5 * r;
        sup[i] = -0.5 * r;
        diag[i] = 1.0 + r - dt * k * v[i];
        vmax = std::max(vmax, std::abs(v[i]));
      }
      detail::thomas(sub, diag, sup, g);
      double upd = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        v[i] += g[i];
        upd = std::max(upd, std::abs(g[i]));
      }
      if (!std::isfinite(upd)) break;
      if (upd <= 1e-14 * (1.0 + vmax)) {
        converged = true;
        break;
      }
    }
    if (!converged)
      throw NewtonFailureError("fd_diffusion_reaction: Newton did not converge at step " + std::to_string(step),
                               static_cast<std::size_t>(step));
    for (std::size_t i = 0; i < n; ++i) u[i + 1] = v[i];
    out.t.push_back(static_cast<double>(step) * dt);
    for (std::size_t j = 0; j < nx; ++j) out.values(step, static_cast<Eigen::Index>(j)) = u[j];
  }
  return out;
}

}  // namespace pidon
