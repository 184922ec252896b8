#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "pidon/autodiff/array_tape.hpp"
#include "pidon/autodiff/jet.hpp"
#include "pidon/autodiff/pointwise.hpp"
#include "pidon/autodiff/tape.hpp"
#include "pidon/operator_net.hpp"
#include "pidon/problem_spec.hpp"
#include "pidon/sampling.hpp"

namespace pidon {

enum class Coord { kX, kT };

/// Query points for one field evaluation. sample[r] is the batch position
/// of the input function used at point r; x is ignored for ODE problems.
struct PointSet {
  std::vector<int> sample;
  std::vector<double> x;
  std::vector<double> t;

  std::size_t size() const { return t.size(); }
  void add(int s, double xv, double tv) {
    sample.push_back(s);
    x.push_back(xv);
    t.push_back(tv);
  }
};

enum LossTerm { kIcTerm = 0, kBcTerm = 1, kResidualTerm = 2, kDataTerm = 3 };
inline constexpr std::array<const char*, 4> kLossTermNames = {"ic", "bc", "residual", "data"};

/// Loss terms before weighting (raw), their weights and the weighted total.
/// Absent terms have raw value 0 and do not enter the total.
template <class S>
struct LossReport {
  std::array<S, 4> raw{};
  std::array<double, 4> weight{1.0, 1.0, 1.0, 1.0};
  std::array<bool, 4> present{};
  S total{};
};

inline double scalar_value(double v) { return v; }
inline double scalar_value(const TapeVar& v) { return v.value(); }
inline double scalar_value(const Array& v) { return v(0, 0); }
inline double scalar_value(const ArrayVar& v) { return v.value()(0, 0); }

struct LossValues {
  std::array<double, 4> raw{};
  std::array<double, 4> weighted{};
  std::array<bool, 4> present{};
  double total = 0.0;
};

template <class S>
LossValues loss_values(const LossReport<S>& r) {
  LossValues v;
  for (int k = 0; k < 4; ++k) {
    v.present[k] = r.present[k];
    v.raw[k] = r.present[k] ? scalar_value(r.raw[k]) : 0.0;
    v.weighted[k] = r.weight[k] * v.raw[k];
  }
  v.total = scalar_value(r.total);
  return v;
}

// ---------------------------------------------------------------------------
// Residuals. Each takes jets of all outputs seeded along one coordinate and
// returns one column per residual component.

template <class C>
std::vector<C> pendulum_residual(const ProblemSpec& p, const std::vector<Jet<C>>& gt) {
  const double damping = p.constant("b") / p.constant("m");
  const double gravity = p.constant("g") / p.constant("L");
  C r1 = gt[0][1] - gt[1][0];
  C r2 = gt[1][1] + damping * gt[1][0] + gravity * sin(gt[0][0]);
  return {std::move(r1), std::move(r2)};
}

template <class C>
std::vector<C> stiff_residual(const ProblemSpec& p, const std::vector<Jet<C>>& gt) {
  const double k1 = p.constant("k1"), k2 = p.constant("k2"), k3 = p.constant("k3");
  const C& g1 = gt[0][0];
  const C& g2 = gt[1][0];
  const C& g3 = gt[2][0];
  C g23 = g2 * g3;
  C g22 = square(g2);
  C r1 = gt[0][1] + k1 * g1 - k3 * g23;
  C r2 = gt[1][1] - k1 * g1 + k2 * g22 + k3 * g23;
  C r3 = gt[2][1] - k2 * g22;
  return {std::move(r1), std::move(r2), std::move(r3)};
}

template <class C>
std::vector<C> inhom_residual(const std::vector<Jet<C>>& gt, const C& forcing) {
  return {C(gt[0][1] - forcing)};
}

template <class C>
std::vector<C> wave_residual(const ProblemSpec& p, const std::vector<Jet<C>>& gt, const std::vector<Jet<C>>& gx) {
  const double c = p.constant("c");
  return {C(gt[0][2] - (c * c) * gx[0][2])};
}

template <class C>
std::vector<C> dr_residual(const ProblemSpec& p, const std::vector<Jet<C>>& gt, const std::vector<Jet<C>>& gx) {
  return {C(gt[0][1] - p.constant("D") * gx[0][2] - p.constant("k") * square(gt[0][0]))};
}

template <class C>
std::vector<C> kdv_residual(const ProblemSpec& p, const std::vector<Jet<C>>& gt, const std::vector<Jet<C>>& gx) {
  C adv = gx[0][0] * gx[0][1];
  return {C(gt[0][1] + p.constant("eps") * adv + p.constant("mu") * gx[0][3])};
}

/// Residual columns at the given points. forcing holds the forced ODE's
/// right-hand side at each point and is ignored otherwise.
template <class Backend>
std::vector<typename Backend::Column> residual_columns(const ProblemSpec& p, Backend& be, const PointSet& pts,
                                                       const std::vector<double>& forcing = {}) {
  switch (p.id) {
    case ProblemId::kPendulum: return pendulum_residual(p, be.field(pts, Coord::kT, 1));
    case ProblemId::kStiff: return stiff_residual(p, be.field(pts, Coord::kT, 1));
    case ProblemId::kInhomOde: {
      if (forcing.size() != pts.size()) throw ShapeError("forced residual needs one forcing value per point");
      return inhom_residual(be.field(pts, Coord::kT, 1), be.column(forcing));
    }
    case ProblemId::kWave: return wave_residual(p, be.field(pts, Coord::kT, 2), be.field(pts, Coord::kX, 2));
    case ProblemId::kDiffusionReaction: return dr_residual(p, be.field(pts, Coord::kT, 1), be.field(pts, Coord::kX, 2));
    case ProblemId::kKdV: return kdv_residual(p, be.field(pts, Coord::kT, 1), be.field(pts, Coord::kX, 3));
  }
  throw ConfigError("unknown problem id");
}

// ---------------------------------------------------------------------------
// Loss assembly over a batch, generic over the evaluation backend.
//
// A backend provides Column and Scalar types and
//   batch_size(), sample(b)                  the batch of input functions
//   field(points, coord, order)              one jet per output, seeded on coord
//   column(values)                           constant column
//   mean(column) -> Scalar

template <class Backend>
LossReport<typename Backend::Scalar> physics_loss(const ProblemSpec& p, Backend& be) {
  using C = typename Backend::Column;
  using S = typename Backend::Scalar;
  const int B = static_cast<int>(be.batch_size());
  if (B == 0) throw ShapeError("loss over an empty batch");

  LossReport<S> rep;
  rep.weight = {p.weights.ic, p.weights.bc, p.weights.residual, p.weights.data};
  auto set = [&](LossTerm k, S v) {
    rep.present[k] = true;
    rep.raw[k] = std::move(v);
  };
  auto msq = [&](const C& c) { return be.mean(square(c)); };

  PointSet res;
  std::vector<double> forcing;
  for (int b = 0; b < B; ++b) {
    const Sample& s = be.sample(b);
    for (std::size_t j = 0; j < s.res_t.size(); ++j) res.add(b, s.res_x.empty() ? 0.0 : s.res_x[j], s.res_t[j]);
    forcing.insert(forcing.end(), s.res_forcing.begin(), s.res_forcing.end());
  }

  if (!p.spatial()) {
    PointSet ic;
    std::vector<std::vector<double>> target(static_cast<std::size_t>(p.n_outputs));
    for (int b = 0; b < B; ++b) {
      const Sample& s = be.sample(b);
      ic.add(b, 0.0, 0.0);
      for (int k = 0; k < p.n_outputs; ++k)
        target[static_cast<std::size_t>(k)].push_back(p.two_branch() ? s.u0 : s.u.at(static_cast<std::size_t>(k)));
    }
    const auto g = be.field(ic, Coord::kT, 0);
    const auto lambda = p.ic_component_weights();
    std::optional<S> l_ic;
    for (int k = 0; k < p.n_outputs; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      S term = msq(C(g[kk][0] - be.column(target[kk])));
      if (lambda[kk] != 1.0) term = term * lambda[kk];
      l_ic = l_ic ? S(*l_ic + term) : term;
    }
    set(kIcTerm, *l_ic);
  } else if (p.id == ProblemId::kWave || p.id == ProblemId::kDiffusionReaction) {
    PointSet ic, bc;
    std::vector<double> target;
    for (int b = 0; b < B; ++b) {
      const Sample& s = be.sample(b);
      for (std::size_t j = 0; j < s.ic_x.size(); ++j) ic.add(b, s.ic_x[j], 0.0);
      target.insert(target.end(), s.ic_target.begin(), s.ic_target.end());
      for (double t : s.bc_t) bc.add(b, p.space->lo, t);
    }
    const std::size_t nbc = bc.size();
    for (std::size_t j = 0; j < nbc; ++j) bc.add(bc.sample[j], p.space->hi, bc.t[j]);

    const int ic_order = p.id == ProblemId::kWave ? 1 : 0;
    const auto g = be.field(ic, Coord::kT, ic_order);
    S l_ic = msq(C(g[0][0] - be.column(target)));
    if (ic_order == 1) l_ic = l_ic + msq(g[0][1]);
    set(kIcTerm, l_ic);
    // Both walls carry the same number of points, so the sum of the two
    // per-wall means is twice the mean over the union.
    const auto gb = be.field(bc, Coord::kT, 0);
    set(kBcTerm, S(msq(gb[0][0]) * 2.0));
  } else {
    PointSet data;
    std::vector<double> meas;
    for (int b = 0; b < B; ++b) {
      const Sample& s = be.sample(b);
      for (std::size_t j = 0; j < s.data_t.size(); ++j) data.add(b, s.data_x[j], s.data_t[j]);
      meas.insert(meas.end(), s.data_s.begin(), s.data_s.end());
    }
    if (data.size() > 0) {
      const auto g = be.field(data, Coord::kT, 0);
      set(kDataTerm, msq(C(g[0][0] - be.column(meas))));
    }
  }

  if (res.size() > 0 && p.weights.residual != 0.0) {
    std::optional<S> l_r;
    for (const auto& r : residual_columns(p, be, res, forcing)) {
      S term = msq(r);
      l_r = l_r ? S(*l_r + term) : term;
    }
    set(kResidualTerm, *l_r);
  }

  std::optional<S> total;
  for (int k = 0; k < 4; ++k) {
    if (!rep.present[k]) continue;
    S term = rep.weight[k] == 1.0 ? rep.raw[k] : S(rep.raw[k] * rep.weight[k]);
    total = total ? S(*total + term) : term;
  }
  rep.total = *total;
  return rep;
}

// ---------------------------------------------------------------------------
// Batched backend: all points of a batch in one array pass. T is Array for
// plain evaluation or ArrayVar when recording on an ArrayTape.

template <class T>
class BatchBackend {
 public:
  using Column = T;
  using Scalar = T;
  /// Maps a query jet (n x d) and per-row sample positions to output jets.
  using Model = std::function<std::vector<Jet<T>>(const Jet<T>&, const std::vector<int>&)>;
  using Lift = std::function<T(const Array&)>;

  BatchBackend(std::vector<const Sample*> batch, bool spatial, Model model, Lift lift)
      : batch_(std::move(batch)), spatial_(spatial), model_(std::move(model)), lift_(std::move(lift)) {}

  std::size_t batch_size() const { return batch_.size(); }
  const Sample& sample(int b) const { return *batch_[static_cast<std::size_t>(b)]; }

  std::vector<Jet<T>> field(const PointSet& pts, Coord coord, int order) {
    if (!spatial_ && coord == Coord::kX) throw UnsupportedFeatureError("ODE problems have no spatial coordinate");
    const auto n = static_cast<Eigen::Index>(pts.size());
    const Eigen::Index d = spatial_ ? 2 : 1;
    Array q(n, d);
    for (Eigen::Index r = 0; r < n; ++r) {
      if (spatial_) q(r, 0) = pts.x[static_cast<std::size_t>(r)];
      q(r, d - 1) = pts.t[static_cast<std::size_t>(r)];
    }
    Jet<T> jq(order);
    jq[0] = lift_(q);
    if (order >= 1) {
      Array dir = Array::Zero(n, d);
      dir.col(coord == Coord::kX ? 0 : d - 1).setOnes();
      jq[1] = lift_(dir);
      for (int k = 2; k <= order; ++k) jq[k] = lift_(Array::Zero(n, d));
    }
    return model_(jq, pts.sample);
  }

  T column(const std::vector<double>& v) const {
    return lift_(Eigen::Map<const Array>(v.data(), static_cast<Eigen::Index>(v.size()), 1));
  }
  T mean(const T& c) const { return pidon::mean(c); }

 private:
  std::vector<const Sample*> batch_;
  bool spatial_;
  Model model_;
  Lift lift_;
};

inline Array branch_input(const std::vector<const Sample*>& batch) {
  if (batch.empty()) throw ShapeError("empty batch");
  const auto m = static_cast<Eigen::Index>(batch[0]->u.size());
  Array u(static_cast<Eigen::Index>(batch.size()), m);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (static_cast<Eigen::Index>(batch[b]->u.size()) != m) throw ShapeError("ragged branch inputs in batch");
    for (Eigen::Index j = 0; j < m; ++j) u(static_cast<Eigen::Index>(b), j) = batch[b]->u[static_cast<std::size_t>(j)];
  }
  return u;
}

inline Array branch_scalar_input(const std::vector<const Sample*>& batch) {
  Array u0(static_cast<Eigen::Index>(batch.size()), 1);
  for (std::size_t b = 0; b < batch.size(); ++b) u0(static_cast<Eigen::Index>(b), 0) = batch[b]->u0;
  return u0;
}

/// Batched operator-net backend. arrays holds the network's layers as T.
template <class T>
BatchBackend<T> onet_backend(const OperatorNetSpec& spec, const OperatorArrays<T>& arrays,
                             std::vector<const Sample*> batch, bool spatial,
                             typename BatchBackend<T>::Lift lift) {
  const T u = lift(branch_input(batch));
  std::optional<T> u0;
  if (spec.two_branch()) u0 = lift(branch_scalar_input(batch));
  T feats = batch_branch_features(spec, arrays, u, u0 ? &*u0 : nullptr);
  auto model = [&spec, &arrays, feats](const Jet<T>& q, const std::vector<int>& idx) {
    return batch_onet_outputs(spec, arrays, feats, idx, q);
  };
  return BatchBackend<T>(std::move(batch), spatial, model, std::move(lift));
}

/// Batched plain-MLP backend (PINN baseline): the network maps the query
/// directly to all outputs and ignores the sample index.
template <class T>
BatchBackend<T> mlp_backend(const MlpSpec& spec, const std::vector<DenseArrays<T>>& layers,
                            std::vector<const Sample*> batch, bool spatial, typename BatchBackend<T>::Lift lift) {
  auto model = [&spec, &layers](const Jet<T>& q, const std::vector<int>&) {
    const Jet<T> out = mlp_forward_batch(spec, layers, q);
    std::vector<Jet<T>> cols;
    for (int o = 0; o < spec.out_dim; ++o) {
      Jet<T> c(out.order());
      for (int k = 0; k <= out.order(); ++k) c[k] = col_block_sum(out[k], o, o + 1);
      cols.push_back(std::move(c));
    }
    return cols;
  };
  return BatchBackend<T>(std::move(batch), spatial, model, std::move(lift));
}

inline Array identity_lift(const Array& a) { return a; }

// ---------------------------------------------------------------------------
// Pointwise backend: each point is evaluated separately through a scalar
// callable. With S = TapeVar this is the scalar reference route for
// gradients; with S = double it evaluates closed-form stubs.

template <class S>
class PointwiseBackend {
 public:
  using Column = Pointwise<S>;
  using Scalar = S;
  /// (batch position, query jets (x?, t)) -> one jet per output.
  using Model = std::function<std::vector<Jet<S>>(int, const std::vector<Jet<S>>&)>;

  PointwiseBackend(std::vector<const Sample*> batch, bool spatial, Model model)
      : batch_(std::move(batch)), spatial_(spatial), model_(std::move(model)) {}

  std::size_t batch_size() const { return batch_.size(); }
  const Sample& sample(int b) const { return *batch_[static_cast<std::size_t>(b)]; }

  std::vector<Jet<Column>> field(const PointSet& pts, Coord coord, int order) {
    if (!spatial_ && coord == Coord::kX) throw UnsupportedFeatureError("ODE problems have no spatial coordinate");
    std::vector<Jet<Column>> out;
    for (std::size_t r = 0; r < pts.size(); ++r) {
      std::vector<Jet<S>> q;
      if (spatial_)
        q.push_back(coord == Coord::kX ? Jet<S>::seed(S(pts.x[r]), order) : Jet<S>::constant(S(pts.x[r]), order));
      q.push_back(coord == Coord::kT ? Jet<S>::seed(S(pts.t[r]), order) : Jet<S>::constant(S(pts.t[r]), order));
      const auto g = model_(pts.sample[r], q);
      if (out.empty()) {
        out.assign(g.size(), Jet<Column>(order));
        for (auto& j : out)
          for (int k = 0; k <= order; ++k) j[k].v.reserve(pts.size());
      }
      for (std::size_t o = 0; o < g.size(); ++o)
        for (int k = 0; k <= order; ++k) out[o][k].v.push_back(g[o][k]);
    }
    return out;
  }

  Column column(const std::vector<double>& v) const {
    Column c;
    c.v.assign(v.begin(), v.end());
    return c;
  }
  S mean(const Column& c) const { return pidon::mean(c); }

 private:
  std::vector<const Sample*> batch_;
  bool spatial_;
  Model model_;
};

/// Pointwise operator-net model with parameters of type P (double or
/// TapeVar). Branch features are computed once per sample.
template <class P>
typename PointwiseBackend<P>::Model onet_pointwise_model(const OperatorNetSpec& spec, std::span<const P> theta,
                                                         const std::vector<const Sample*>& batch) {
  std::vector<std::vector<std::vector<P>>> feats;
  for (const Sample* s : batch)
    feats.push_back(branch_features<P>(spec, theta, s->u,
                                       spec.two_branch() ? std::optional<double>(s->u0) : std::nullopt));
  return [spec, theta, feats = std::move(feats)](int b, const std::vector<Jet<P>>& q) {
    return onet_eval_with<Jet<P>, P>(spec, theta, feats[static_cast<std::size_t>(b)], std::span<const Jet<P>>(q));
  };
}

/// Residual vector of a scalar operator net at one query point.
inline std::vector<double> onet_residual(const ProblemSpec& p, const OperatorNet& net, const Sample& s, double x,
                                         double t, double forcing = 0.0) {
  std::vector<const Sample*> batch{&s};
  PointwiseBackend<double> be(batch, p.spatial(),
                              onet_pointwise_model<double>(net.spec, std::span<const double>(net.params), batch));
  PointSet pts;
  pts.add(0, x, t);
  std::vector<double> out;
  for (const auto& r : residual_columns(p, be, pts, std::vector<double>{forcing})) out.push_back(r[0]);
  return out;
}

// ---------------------------------------------------------------------------
// Closed-form solutions.

/// Wave equation with initial profile sin(pi x) and zero velocity; KdV
/// single soliton with descriptor (a, c). Other problems have none.
inline std::optional<double> exact_solution(const ProblemSpec& p, const std::vector<double>& descriptor, double x,
                                            double t) {
  switch (p.id) {
    case ProblemId::kWave:
      return std::sin(std::numbers::pi * x) * std::cos(p.constant("c") * std::numbers::pi * t);
    case ProblemId::kKdV:
      if (descriptor.size() != 2) throw ShapeError("KdV exact solution needs (a, c)");
      return kdv_soliton(descriptor[0], descriptor[1], x, t);
    default:
      return std::nullopt;
  }
}

}  // namespace pidon
