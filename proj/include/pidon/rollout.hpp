#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pidon/errors.hpp"
#include "pidon/metrics.hpp"
#include "pidon/operator_net.hpp"
#include "pidon/problem_spec.hpp"
#include "pidon/sampling.hpp"
#include "pidon/solvers.hpp"

namespace pidon {

/// Maps the state at the start of a window (ODE state vector or field on the
/// sensor grid) to the state at each local time in t. Row j of the result is
/// the state at t[j]; the column count equals the state dimension.
using Propagator = std::function<Mat(const Vec& u, const std::vector<double>& t)>;

/// Forced scalar ODE: the window's forcing is given both sampled on the
/// sensors and as a callable of local time. Returns s at each t.
using ForcedPropagator = std::function<Vec(const Vec& forcing_on_sensors, const std::function<double(double)>& forcing,
                                           double u0, const std::vector<double>& t)>;

struct RolloutPlan {
  int steps = 1;
  double dt = 1.0;
  int points_per_window = 101;  // including both window ends

  std::vector<double> window_times() const {
    if (points_per_window < 2) throw ConfigError("rollout needs at least 2 points per window");
    std::vector<double> t(static_cast<std::size_t>(points_per_window));
    const int last = points_per_window - 1;
    for (int j = 0; j <= last; ++j) t[static_cast<std::size_t>(j)] = dt * static_cast<double>(j) / last;
    t.back() = dt;
    return t;
  }
};

/// Concatenated trajectory. Window boundaries appear once: the first row of
/// window k + 1 is dropped because it repeats the last row of window k.
struct RolloutResult {
  std::vector<double> t;
  Mat values;                 // rows = global times, cols = state components
  std::vector<Vec> restarts;  // u^0, u^1, ..., u^N
};

namespace detail {

inline void check_window(const Mat& block, int k) {
  if (!block.allFinite() || block.cwiseAbs().maxCoeff() > 1e6)
    throw RolloutDivergedError("rollout diverged in window " + std::to_string(k), k);
}

inline void append_block(RolloutResult& r, const Mat& block, const std::vector<double>& tw, double offset, bool first) {
  const Eigen::Index skip = first ? 0 : 1;
  const Eigen::Index add = block.rows() - skip;
  const Eigen::Index old = r.values.rows();
  r.values.conservativeResize(old + add, block.cols());
  r.values.bottomRows(add) = block.bottomRows(add);
  for (Eigen::Index j = skip; j < block.rows(); ++j) r.t.push_back(offset + tw[static_cast<std::size_t>(j)]);
}

}  // namespace detail

/// Iterates the short-horizon operator: window k starts from the state the
/// previous window reached at t = dt.
inline RolloutResult rollout(const Propagator& prop, const Vec& u0, const RolloutPlan& plan) {
  if (plan.steps < 1) throw ConfigError("rollout needs at least one window");
  if (!(plan.dt > 0.0)) throw ConfigError("rollout window length must be positive");
  const auto tw = plan.window_times();
  RolloutResult r;
  r.values.resize(0, u0.size());
  r.restarts.push_back(u0);
  Vec u = u0;
  for (int k = 1; k <= plan.steps; ++k) {
    const Mat block = prop(u, tw);
    if (block.rows() != static_cast<Eigen::Index>(tw.size()) || block.cols() != u0.size())
      throw ShapeError("propagator returned a block of the wrong shape");
    detail::check_window(block, k);
    detail::append_block(r, block, tw, (k - 1) * plan.dt, k == 1);
    u = block.row(block.rows() - 1).transpose();
    r.restarts.push_back(u);
  }
  return r;
}

/// Rollout of the forced scalar ODE. Window k sees f((k - 1) dt + tau) on the
/// forcing sensors tau in [0, dt].
inline RolloutResult rollout_forced(const ForcedPropagator& prop, double u0, const std::function<double(double)>& forcing,
                                    const SensorGrid& sensors, const RolloutPlan& plan) {
  if (plan.steps < 1) throw ConfigError("rollout needs at least one window");
  sensors.validate();
  const auto tw = plan.window_times();
  RolloutResult r;
  r.values.resize(0, 1);
  r.restarts.push_back(Vec::Constant(1, u0));
  double s0 = u0;
  for (int k = 1; k <= plan.steps; ++k) {
    const double offset = (k - 1) * plan.dt;
    const std::function<double(double)> window = [&forcing, offset](double tau) { return forcing(offset + tau); };
    Vec fs(static_cast<Eigen::Index>(sensors.points.size()));
    for (std::size_t i = 0; i < sensors.points.size(); ++i) fs(static_cast<Eigen::Index>(i)) = window(sensors.points[i]);
    const Vec col = prop(fs, window, s0, tw);
    if (col.size() != static_cast<Eigen::Index>(tw.size())) throw ShapeError("forced propagator returned wrong length");
    const Mat block = col;
    detail::check_window(block, k);
    detail::append_block(r, block, tw, offset, k == 1);
    s0 = col(col.size() - 1);
    r.restarts.push_back(Vec::Constant(1, s0));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Exact propagators used as plumbing oracles.

/// Flow map of ds/dt = -rate s.
inline Propagator decay_propagator(double rate = 1.0) {
  return [rate](const Vec& u, const std::vector<double>& t) {
    Mat out(static_cast<Eigen::Index>(t.size()), u.size());
    for (std::size_t j = 0; j < t.size(); ++j) out.row(static_cast<Eigen::Index>(j)) = u.transpose() * std::exp(-rate * t[j]);
    return out;
  };
}

/// s(t) = s0 + int_0^t f by composite 5-point Gauss-Legendre between grid
/// times, subdividing each gap into pieces no longer than `h`.
inline std::vector<double> cumulative_integral(const std::function<double(double)>& f, double s0,
                                               const std::vector<double>& t, double h = 0.01) {
  static constexpr double x[5] = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                  0.9061798459386640};
  static constexpr double w[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                  0.2369268850561891, 0.2369268850561891};
  std::vector<double> out(t.size());
  double acc = s0, prev = 0.0;
  for (std::size_t j = 0; j < t.size(); ++j) {
    const double gap = t[j] - prev;
    const int pieces = std::max(1, static_cast<int>(std::ceil(gap / h)));
    const double len = gap / pieces;
    for (int p = 0; p < pieces; ++p) {
      const double mid = prev + (p + 0.5) * len;
      for (int q = 0; q < 5; ++q) acc += 0.5 * len * w[q] * f(mid + 0.5 * len * x[q]);
    }
    out[j] = acc;
    prev = t[j];
  }
  return out;
}

inline ForcedPropagator quadrature_propagator() {
  return [](const Vec&, const std::function<double(double)>& f, double u0, const std::vector<double>& t) {
    const auto s = cumulative_integral(f, u0, t);
    return Vec(Eigen::Map<const Vec>(s.data(), static_cast<Eigen::Index>(s.size())));
  };
}

// ---------------------------------------------------------------------------
// Trained operator nets as propagators.

namespace detail {

inline Mat onet_block(const OperatorNet& net, const OperatorArrays<Array>& arrays, const Array& u,
                      const Array* u0, const Array& query) {
  const Array feats = batch_branch_features(net.spec, arrays, u, u0);
  Jet<Array> q(0);
  q[0] = query;
  const std::vector<int> idx(static_cast<std::size_t>(query.rows()), 0);
  const auto out = batch_onet_outputs(net.spec, arrays, feats, idx, q);
  Mat m(query.rows(), static_cast<Eigen::Index>(out.size()));
  for (std::size_t o = 0; o < out.size(); ++o) m.col(static_cast<Eigen::Index>(o)) = out[o][0].matrix();
  return m;
}

}  // namespace detail

/// Operator net as a propagator: for ODE problems the state is the output
/// vector; for PDE problems it is the field on the sensor grid.
inline Propagator onet_propagator(const ProblemSpec& p, const OperatorNet& net) {
  if (p.two_branch()) throw ArityError("forced problems need onet_forced_propagator");
  auto arrays = std::make_shared<OperatorArrays<Array>>(operator_arrays(net));
  const auto sensors = p.sensor_grid().points;
  const bool spatial = p.spatial();
  return [net, arrays, sensors, spatial](const Vec& u, const std::vector<double>& t) -> Mat {
    const Array urow = u.transpose().array();
    const auto nt = static_cast<Eigen::Index>(t.size());
    if (!spatial) {
      Array q(nt, 1);
      for (Eigen::Index j = 0; j < nt; ++j) q(j, 0) = t[static_cast<std::size_t>(j)];
      return detail::onet_block(net, *arrays, urow, nullptr, q);
    }
    const auto nx = static_cast<Eigen::Index>(sensors.size());
    Array q(nt * nx, 2);
    for (Eigen::Index j = 0; j < nt; ++j)
      for (Eigen::Index i = 0; i < nx; ++i) {
        q(j * nx + i, 0) = sensors[static_cast<std::size_t>(i)];
        q(j * nx + i, 1) = t[static_cast<std::size_t>(j)];
      }
    const Mat flat = detail::onet_block(net, *arrays, urow, nullptr, q);
    Mat out(nt, nx);
    for (Eigen::Index j = 0; j < nt; ++j) out.row(j) = flat.col(0).segment(j * nx, nx).transpose();
    return out;
  };
}

inline ForcedPropagator onet_forced_propagator(const ProblemSpec& p, const OperatorNet& net) {
  if (!p.two_branch() || !net.spec.two_branch()) throw ArityError("forced propagator needs a two-branch net");
  auto arrays = std::make_shared<OperatorArrays<Array>>(operator_arrays(net));
  return [net, arrays](const Vec& fs, const std::function<double(double)>&, double u0, const std::vector<double>& t) {
    const Array urow = fs.transpose().array();
    const Array u0a = Array::Constant(1, 1, u0);
    Array q(static_cast<Eigen::Index>(t.size()), 1);
    for (std::size_t j = 0; j < t.size(); ++j) q(static_cast<Eigen::Index>(j), 0) = t[j];
    return Vec(detail::onet_block(net, *arrays, urow, &u0a, q).col(0));
  };
}

// ---------------------------------------------------------------------------
// Test cases and reference solutions.

struct TestCase {
  Vec u;                                 // initial state or profile on the sensors
  double u0 = 0.0;                       // forced ODE initial value
  std::optional<FourierForcing> forcing;  // forced ODE
  std::vector<double> descriptor;        // generating parameters (KdV)
};

struct TestSetOptions {
  std::vector<Interval> box;  // overrides the problem's input box when non-empty
  int forcing_features = 200;
};

/// Initial conditions drawn from the problem's input space. Wave cases all
/// use sin(pi x), the profile with a closed-form solution.
inline std::vector<TestCase> make_test_set(const ProblemSpec& p, int n, std::uint64_t seed,
                                           const TestSetOptions& opts = {}) {
  validate(p);
  const auto& box = opts.box.empty() ? p.input.box : opts.box;
  const auto sensors = p.sensor_grid().points;
  std::vector<TestCase> out;
  for (int i = 0; i < n; ++i) {
    auto rng = derived_stream(seed, static_cast<std::uint64_t>(i), 0x74657374u);
    TestCase c;
    switch (p.input.kind) {
      case InputKind::kUniformBox:
        c.u.resize(static_cast<Eigen::Index>(box.size()));
        for (std::size_t k = 0; k < box.size(); ++k)
          c.u(static_cast<Eigen::Index>(k)) = std::uniform_real_distribution<double>(box[k].lo, box[k].hi)(rng);
        break;
      case InputKind::kForcingAndIc:
        c.u0 = std::uniform_real_distribution<double>(box.at(0).lo, box.at(0).hi)(rng);
        c.forcing = fourier_forcing(p.input.length_scale, opts.forcing_features, rng());
        break;
      case InputKind::kGrf: {
        c.u.resize(static_cast<Eigen::Index>(sensors.size()));
        if (p.id == ProblemId::kWave) {
          for (std::size_t k = 0; k < sensors.size(); ++k)
            c.u(static_cast<Eigen::Index>(k)) = taper(*p.space, sensors[k]);
        } else {
          const auto draw = grf_draw(grf_factor(sensors, p.input.length_scale), rng);
          for (std::size_t k = 0; k < sensors.size(); ++k)
            c.u(static_cast<Eigen::Index>(k)) = draw[k] * (p.input.taper ? taper(*p.space, sensors[k]) : 1.0);
        }
        break;
      }
      case InputKind::kSoliton: {
        const double a = std::uniform_real_distribution<double>(box.at(0).lo, box.at(0).hi)(rng);
        const double cc = std::uniform_real_distribution<double>(box.at(1).lo, box.at(1).hi)(rng);
        c.descriptor = {a, cc};
        c.u.resize(static_cast<Eigen::Index>(sensors.size()));
        for (std::size_t k = 0; k < sensors.size(); ++k) c.u(static_cast<Eigen::Index>(k)) = kdv_soliton(a, cc, sensors[k], 0.0);
        break;
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

namespace detail {

// Wave equation with zero initial velocity from a profile on a uniform grid
// with zero endpoints: sine-series (DST-I) expansion, each mode oscillating
// at its own frequency.
inline Mat wave_from_profile(const ProblemSpec& p, const Vec& u, const std::vector<double>& times) {
  const auto m = u.size();
  const Eigen::Index M = m - 1;
  const double c = p.constant("c");
  const double L = p.space->width();
  Vec b = Vec::Zero(M);
  for (Eigen::Index n = 1; n < M; ++n) {
    double acc = 0.0;
    for (Eigen::Index j = 1; j < M; ++j) acc += u(j) * std::sin(std::numbers::pi * n * j / static_cast<double>(M));
    b(n) = 2.0 * acc / static_cast<double>(M);
  }
  Mat out(static_cast<Eigen::Index>(times.size()), m);
  for (std::size_t k = 0; k < times.size(); ++k)
    for (Eigen::Index j = 0; j < m; ++j) {
      double acc = 0.0;
      for (Eigen::Index n = 1; n < M; ++n)
        acc += b(n) * std::sin(std::numbers::pi * n * j / static_cast<double>(M)) *
               std::cos(std::numbers::pi * n * c * times[k] / L);
      out(static_cast<Eigen::Index>(k), j) = acc;
    }
  return out;
}

}  // namespace detail

/// Reference trajectory of a test case at the given global times: adaptive
/// RK for the pendulum, TR-BDF2 for the stiff system, quadrature for the
/// forced ODE, sine series for the wave equation, Crank-Nicolson for
/// diffusion-reaction and the closed-form soliton for KdV.
inline Mat reference_solution(const ProblemSpec& p, const TestCase& c, const std::vector<double>& times) {
  if (times.empty()) throw ShapeError("reference_solution: no times");
  const double T = *std::max_element(times.begin(), times.end());
  switch (p.id) {
    case ProblemId::kPendulum:
      return rk_adaptive(pendulum_system(p), c.u, std::max(T, 1e-12), 1e-11, 1e-13).sample(times);
    case ProblemId::kStiff:
      return stiff_implicit(robertson_system(p), c.u, std::max(T, 1e-12), 1e-8, 1e-14).sample(times);
    case ProblemId::kInhomOde: {
      if (!c.forcing) throw ConfigError("forced test case has no forcing");
      const FourierForcing f = *c.forcing;
      std::vector<double> sorted = times;
      std::sort(sorted.begin(), sorted.end());
      const auto s = cumulative_integral([&f](double t) { return f(t); }, c.u0, sorted);
      Mat out(static_cast<Eigen::Index>(times.size()), 1);
      for (std::size_t k = 0; k < times.size(); ++k) {
        const auto it = std::lower_bound(sorted.begin(), sorted.end(), times[k]);
        out(static_cast<Eigen::Index>(k), 0) = s[static_cast<std::size_t>(it - sorted.begin())];
      }
      return out;
    }
    case ProblemId::kWave: return detail::wave_from_profile(p, c.u, times);
    case ProblemId::kDiffusionReaction: {
      const double dt = p.dt / 200.0;
      const double Tg = std::ceil(T / dt - 1e-9) * dt;
      const auto field = fd_diffusion_reaction(std::vector<double>(c.u.data(), c.u.data() + c.u.size()),
                                               p.constant("D"), p.constant("k"), std::max(Tg, dt), dt, *p.space);
      Mat out(static_cast<Eigen::Index>(times.size()), c.u.size());
      for (std::size_t k = 0; k < times.size(); ++k) {
        const double pos = times[k] / dt;
        const auto i0 = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(pos)), field.values.rows() - 1);
        const double th = pos - static_cast<double>(i0);
        if (th < 1e-9 || i0 + 1 >= field.values.rows())
          out.row(static_cast<Eigen::Index>(k)) = field.values.row(i0);
        else
          out.row(static_cast<Eigen::Index>(k)) = (1.0 - th) * field.values.row(i0) + th * field.values.row(i0 + 1);
      }
      return out;
    }
    case ProblemId::kKdV: {
      if (c.descriptor.size() != 2) throw ShapeError("KdV test case needs (a, c)");
      const auto sensors = p.sensor_grid().points;
      Mat out(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(sensors.size()));
      for (std::size_t k = 0; k < times.size(); ++k)
        for (std::size_t j = 0; j < sensors.size(); ++j)
          out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) =
              kdv_soliton(c.descriptor[0], c.descriptor[1], sensors[j], times[k]);
      return out;
    }
  }
  throw ConfigError("unknown problem id");
}

// ---------------------------------------------------------------------------
// Error against horizon.

/// Rolls one test case forward for `steps` windows with `points` per window.
using CaseRollout = std::function<RolloutResult(const TestCase&, int steps, int points)>;
using CaseReference = std::function<Mat(const TestCase&, const std::vector<double>& times)>;

inline CaseRollout net_rollout(const ProblemSpec& p, const OperatorNet& net) {
  if (p.two_branch()) {
    auto prop = onet_forced_propagator(p, net);
    const auto sensors = p.sensor_grid();
    const double dt = p.dt;
    return [prop, sensors, dt](const TestCase& c, int steps, int points) {
      const FourierForcing f = c.forcing.value();
      return rollout_forced(prop, c.u0, [f](double t) { return f(t); }, sensors, {steps, dt, points});
    };
  }
  auto prop = onet_propagator(p, net);
  const double dt = p.dt;
  return [prop, dt](const TestCase& c, int steps, int points) { return rollout(prop, c.u, {steps, dt, points}); };
}

inline CaseReference problem_reference(const ProblemSpec& p) {
  return [p](const TestCase& c, const std::vector<double>& times) { return reference_solution(p, c, times); };
}

struct HorizonRow {
  double T = 0.0;
  double mean_error = 0.0;
  std::vector<double> component_error;  // ODE problems: per output
  int diverged = 0;                     // cases whose rollout blew up (counted as error 1)
};

/// Worker count from PIDON_WORKERS, default 1.
inline int env_workers() {
  if (const char* s = std::getenv("PIDON_WORKERS")) {
    const int n = std::atoi(s);
    if (n >= 1) return n;
  }
  return 1;
}

/// Mean relative L2 error over the test cases on [0, T] for every T, using
/// `points_per_window` - 1 evaluation intervals per window.
inline std::vector<HorizonRow> error_vs_horizon(const ProblemSpec& p, const CaseRollout& roll, const CaseReference& ref,
                                                const std::vector<TestCase>& cases, const std::vector<double>& Ts,
                                                int points_per_window = 11, int workers = 1) {
  if (cases.empty()) throw ConfigError("error_vs_horizon: empty test set");
  if (Ts.empty()) throw ConfigError("error_vs_horizon: no horizons");
  int steps = 0;
  for (double T : Ts) {
    const double w = T / p.dt;
    if (!(T > 0.0) || std::abs(w - std::round(w)) > 1e-9 * std::max(1.0, w))
      throw ConfigError("horizon " + std::to_string(T) + " is not a positive multiple of the window length");
    steps = std::max(steps, static_cast<int>(std::lround(w)));
  }
  const bool ode = !p.spatial();

  // errors[c][h] and per-component errors[c][h][k]
  std::vector<std::vector<double>> err(cases.size(), std::vector<double>(Ts.size()));
  std::vector<std::vector<std::vector<double>>> comp(cases.size(), std::vector<std::vector<double>>(Ts.size()));
  std::vector<char> blew(cases.size(), 0);
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t c = next++; c < cases.size(); c = next++) {
      RolloutResult r;
      try {
        r = roll(cases[c], steps, points_per_window);
      } catch (const RolloutDivergedError&) {
        blew[c] = 1;
        for (std::size_t h = 0; h < Ts.size(); ++h) {
          err[c][h] = 1.0;
          comp[c][h].assign(ode ? static_cast<std::size_t>(p.n_outputs) : 0, 1.0);
        }
        continue;
      }
      const Mat reference = ref(cases[c], r.t);
      for (std::size_t h = 0; h < Ts.size(); ++h) {
        Eigen::Index rows = 0;
        while (rows < static_cast<Eigen::Index>(r.t.size()) && r.t[static_cast<std::size_t>(rows)] <= Ts[h] * (1 + 1e-12))
          ++rows;
        err[c][h] = rel_l2(Mat(r.values.topRows(rows)), Mat(reference.topRows(rows)));
        if (ode)
          for (Eigen::Index k = 0; k < r.values.cols(); ++k)
            comp[c][h].push_back(rel_l2(Mat(r.values.col(k).head(rows)), Mat(reference.col(k).head(rows))));
      }
    }
  };
  const int nw = std::max(1, std::min<int>(workers, static_cast<int>(cases.size())));
  if (nw == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < nw; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  std::vector<HorizonRow> rows;
  for (std::size_t h = 0; h < Ts.size(); ++h) {
    HorizonRow row;
    row.T = Ts[h];
    for (std::size_t c = 0; c < cases.size(); ++c) {
      row.mean_error += err[c][h] / static_cast<double>(cases.size());
      row.diverged += blew[c];
      if (row.component_error.size() < comp[c][h].size()) row.component_error.resize(comp[c][h].size(), 0.0);
      for (std::size_t k = 0; k < comp[c][h].size(); ++k)
        row.component_error[k] += comp[c][h][k] / static_cast<double>(cases.size());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace pidon
