#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "pidon/errors.hpp"
#include "pidon/problem_spec.hpp"

namespace pidon {

/// Independent generator for (seed, index, salt). Used for per-sample
/// streams so that sample i does not depend on how many samples precede it.
inline std::mt19937_64 derived_stream(std::uint64_t seed, std::uint64_t index, std::uint32_t salt = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), salt};
  return std::mt19937_64(seq);
}

// ---------------------------------------------------------------------------
// Gaussian random fields with the squared-exponential kernel
// k(x, y) = exp(-(x - y)^2 / (2 l^2)).

struct GrfSpec {
  double length_scale = 0.5;
  SensorGrid grid;
  double jitter = 1e-10;
};

inline Eigen::MatrixXd se_kernel(const std::vector<double>& x, double l) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double d = x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)];
      k(i, j) = k(j, i) = std::exp(-d * d / (2.0 * l * l));
    }
  return k;
}

/// Lower Cholesky factor of K + jitter I. The jitter is raised tenfold up to
/// 1e-6 before giving up.
inline Eigen::MatrixXd grf_factor(const std::vector<double>& x, double l, double jitter = 1e-10) {
  if (!(l > 0.0)) throw ConfigError("GRF length scale must be positive");
  if (x.empty()) throw DegenerateGridError("GRF over an empty point set");
  for (double v : x)
    if (!std::isfinite(v)) throw DegenerateGridError("GRF point set contains a non-finite coordinate");
  const Eigen::MatrixXd k = se_kernel(x, l);
  for (double j = jitter; j <= 1e-6 * (1.0 + 1e-9); j *= 10.0) {
    Eigen::LLT<Eigen::MatrixXd> llt(k + j * Eigen::MatrixXd::Identity(k.rows(), k.cols()));
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw DegenerateGridError("GRF covariance is not positive definite with jitter up to 1e-6 (" +
                            std::to_string(x.size()) + " points, l = " + std::to_string(l) + ")");
}

inline std::vector<double> grf_draw(const Eigen::MatrixXd& factor, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(factor.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  const Eigen::VectorXd y = factor.triangularView<Eigen::Lower>() * z;
  return {y.data(), y.data() + y.size()};
}

inline std::vector<double> grf_sample(const GrfSpec& spec, std::uint64_t seed) {
  spec.grid.validate();
  std::mt19937_64 rng(seed);
  return grf_draw(grf_factor(spec.grid.points, spec.length_scale, spec.jitter), rng);
}

/// Stationary approximation of the same GRF on an unbounded time axis:
/// f(t) = sqrt(2/M) sum_j cos(w_j t + b_j), w_j ~ N(0, 1/l^2), b_j ~ U(0, 2 pi).
/// Its covariance converges to the squared-exponential kernel as M grows.
struct FourierForcing {
  std::vector<double> w;
  std::vector<double> b;

  double operator()(double t) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) acc += std::cos(w[j] * t + b[j]);
    return std::sqrt(2.0 / static_cast<double>(w.size())) * acc;
  }
};

inline FourierForcing fourier_forcing(double l, int features, std::uint64_t seed) {
  if (!(l > 0.0) || features < 1) throw ConfigError("fourier forcing needs l > 0 and at least one feature");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / l);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  FourierForcing f;
  for (int j = 0; j < features; ++j) {
    f.w.push_back(normal(rng));
    f.b.push_back(phase(rng));
  }
  return f;
}

// ---------------------------------------------------------------------------
// Training sets.

/// KdV single soliton: c/2 sech^2(sqrt(c)/2 (5x - c t / 10 - a)).
inline double kdv_soliton(double a, double c, double x, double t) {
  const double s = 1.0 / std::cosh(0.5 * std::sqrt(c) * (5.0 * x - 0.1 * c * t - a));
  return 0.5 * c * s * s;
}

inline double taper(const Interval& space, double x) {
  return std::sin(std::numbers::pi * (x - space.lo) / space.width());
}

/// One input function with its collocation points.
struct Sample {
  std::vector<double> u;            // branch-I input
  double u0 = 0.0;                  // branch-II input (forced ODE)
  std::vector<double> ic_x;         // IC points (PDE), with targets
  std::vector<double> ic_target;
  std::vector<double> bc_t;         // boundary times (PDE)
  std::vector<double> res_x;        // residual points; res_x empty for ODEs
  std::vector<double> res_t;
  std::vector<double> res_forcing;  // forcing at res_t (forced ODE)
  std::vector<double> data_x;       // measurements (KdV)
  std::vector<double> data_t;
  std::vector<double> data_s;
  std::vector<double> descriptor;   // generating parameters, e.g. (a, c)

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct TrainSet {
  ProblemId problem = ProblemId::kPendulum;
  std::uint64_t seed = 0;
  int P = 0;
  int Q = 0;
  SensorGrid sensors;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
};

namespace detail {

inline std::vector<double> uniform_points(std::mt19937_64& rng, const Interval& iv, int n) {
  std::uniform_real_distribution<double> d(iv.lo, iv.hi);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& e : v) e = d(rng);
  return v;
}

// Draws a GRF jointly on `a` followed by `b`, returning both parts.
inline std::pair<std::vector<double>, std::vector<double>> joint_grf(const std::vector<double>& a,
                                                                     const std::vector<double>& b, double l,
                                                                     std::mt19937_64& rng) {
  std::vector<double> pts = a;
  pts.insert(pts.end(), b.begin(), b.end());
  const auto draw = grf_draw(grf_factor(pts, l), rng);
  return {{draw.begin(), draw.begin() + static_cast<std::ptrdiff_t>(a.size())},
          {draw.begin() + static_cast<std::ptrdiff_t>(a.size()), draw.end()}};
}

}  // namespace detail

/// Draws one input sample and its collocation points.
inline Sample make_sample(const ProblemSpec& p, int P, int Q, std::mt19937_64& rng) {
  Sample s;
  const Interval time{0.0, p.dt};
  switch (p.input.kind) {
    case InputKind::kUniformBox: {
      for (const auto& iv : p.input.box) s.u.push_back(std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng));
      s.res_t = detail::uniform_points(rng, time, Q);
      break;
    }
    case InputKind::kForcingAndIc: {
      const auto& iv = p.input.box.at(0);
      s.u0 = std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng);
      s.res_t = detail::uniform_points(rng, time, Q);
      auto [u, f] = detail::joint_grf(p.sensor_grid().points, s.res_t, p.input.length_scale, rng);
      s.u = std::move(u);
      s.res_forcing = std::move(f);
      break;
    }
    case InputKind::kGrf: {
      const auto sensors = p.sensor_grid().points;
      s.ic_x = detail::uniform_points(rng, *p.space, P);
      s.bc_t = detail::uniform_points(rng, time, P);
      s.res_x = detail::uniform_points(rng, *p.space, Q);
      s.res_t = detail::uniform_points(rng, time, Q);
      auto [u, target] = detail::joint_grf(sensors, s.ic_x, p.input.length_scale, rng);
      if (p.input.taper) {
        for (std::size_t i = 0; i < u.size(); ++i) u[i] *= taper(*p.space, sensors[i]);
        for (std::size_t i = 0; i < target.size(); ++i) target[i] *= taper(*p.space, s.ic_x[i]);
      }
      s.u = std::move(u);
      s.ic_target = std::move(target);
      break;
    }
    case InputKind::kSoliton: {
      const double a = std::uniform_real_distribution<double>(p.input.box.at(0).lo, p.input.box.at(0).hi)(rng);
      const double c = std::uniform_real_distribution<double>(p.input.box.at(1).lo, p.input.box.at(1).hi)(rng);
      s.descriptor = {a, c};
      for (double x : p.sensor_grid().points) s.u.push_back(kdv_soliton(a, c, x, 0.0));
      s.data_x = detail::uniform_points(rng, *p.space, P);
      s.data_t = detail::uniform_points(rng, time, P);
      for (int j = 0; j < P; ++j)
        s.data_s.push_back(kdv_soliton(a, c, s.data_x[static_cast<std::size_t>(j)], s.data_t[static_cast<std::size_t>(j)]));
      s.res_x = detail::uniform_points(rng, *p.space, Q);
      s.res_t = detail::uniform_points(rng, time, Q);
      break;
    }
  }
  return s;
}

inline TrainSet make_train_set(const ProblemSpec& p, int N, int P, int Q, std::uint64_t seed) {
  validate(p);
  if (N < 0 || P < 0 || Q < 1) throw ConfigError("make_train_set: invalid sizes");
  TrainSet ts{p.id, seed, P, Q, p.sensor_grid(), {}};
  ts.samples.reserve(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) {
    auto rng = derived_stream(seed, static_cast<std::uint64_t>(i), 0x73616d70u);
    ts.samples.push_back(make_sample(p, P, Q, rng));
  }
  return ts;
}

inline TrainSet make_train_set(const ProblemSpec& p, int N, std::uint64_t seed) {
  return make_train_set(p, N, p.P, p.Q, seed);
}

}  // namespace pidon
