#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <locale>
#include <sstream>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pidon/autodiff/array_tape.hpp"
#include "pidon/autodiff/tape.hpp"
#include "pidon/errors.hpp"
#include "pidon/operator_net.hpp"
#include "pidon/problems.hpp"
#include "pidon/sampling.hpp"

namespace pidon {

// ---------------------------------------------------------------------------
// Adam with staircase learning-rate decay.

struct OptimState {
  long step = 0;
  std::vector<double> m;
  std::vector<double> v;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double lr0 = 1e-3;
  double decay_rate = 0.9;
  long decay_every = 5000;

  static OptimState for_params(std::size_t n, double lr0 = 1e-3) {
    OptimState s;
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
    s.lr0 = lr0;
    return s;
  }

  friend bool operator==(const OptimState&, const OptimState&) = default;
};

/// lr0 * decay_rate^floor(step / decay_every).
inline double learning_rate(const OptimState& s, long step) {
  if (s.decay_every <= 0) return s.lr0;
  return s.lr0 * std::pow(s.decay_rate, static_cast<double>(step / s.decay_every));
}

/// One bias-corrected Adam update. The step counter before the update selects
/// the learning rate. Throws before touching anything if a gradient entry is
/// not finite.
inline void adam_step(std::span<double> params, std::span<const double> grads, OptimState& s) {
  if (params.size() != grads.size() || s.m.size() != params.size() || s.v.size() != params.size())
    throw ShapeError("adam_step: parameter, gradient and moment sizes differ");
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (!std::isfinite(grads[i]))
      throw NonFiniteGradientError("non-finite gradient at parameter " + std::to_string(i), i);
  const double lr = learning_rate(s, s.step);
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grads[i];
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grads[i] * grads[i];
    params[i] -= lr * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + s.eps);
  }
}

// ---------------------------------------------------------------------------
// Objectives: loss and parameter gradient over a batch of sample indices.

/// Records one MLP's layers as tape leaves.
inline std::vector<DenseArrays<ArrayVar>> leaf_layers(ArrayTape& tape, const MlpSpec& spec,
                                                      std::span<const double> theta) {
  std::vector<DenseArrays<ArrayVar>> out;
  for (const auto& a : dense_arrays(spec, theta)) out.push_back({tape.leaf(a.weight), tape.leaf(a.bias)});
  return out;
}

/// Scatters the adjoints of leaf_layers back into flat storage at `offset`.
inline void gather_layer_grads(const ArrayTape& tape, const MlpSpec& spec,
                               const std::vector<DenseArrays<ArrayVar>>& layers, std::span<double> grad,
                               std::size_t offset) {
  const auto layout = dense_layout(spec, offset);
  for (std::size_t l = 0; l < layout.size(); ++l) {
    const auto& d = layout[l];
    const Array gw = tape.grad(layers[l].weight);
    const Array gb = tape.grad(layers[l].bias);
    for (int i = 0; i < d.in; ++i)
      for (int j = 0; j < d.out; ++j) grad[d.weight_offset() + static_cast<std::size_t>(i) * d.out + j] = gw(i, j);
    for (int j = 0; j < d.out; ++j) grad[d.bias_offset() + static_cast<std::size_t>(j)] = gb(0, j);
  }
}

/// Physics-informed operator-net loss evaluated with the batched array tape.
class OnetObjective {
 public:
  OnetObjective(ProblemSpec problem, OperatorNetSpec spec, const TrainSet& data)
      : problem_(std::move(problem)), spec_(std::move(spec)), data_(&data) {
    validate(spec_);
    if (spec_.n_outputs() != problem_.n_outputs) throw ShapeError("operator net output count differs from problem");
    if (spec_.two_branch() != problem_.two_branch()) throw ArityError("operator net branch count does not match problem");
  }

  std::size_t param_count() const { return operator_layout(spec_).total; }
  std::size_t sample_count() const { return data_->size(); }
  const ProblemSpec& problem() const { return problem_; }
  const OperatorNetSpec& spec() const { return spec_; }

  /// Loss over the samples in idx; fills grad when non-null.
  LossValues evaluate(std::span<const double> theta, const std::vector<int>& idx, std::vector<double>* grad) {
    if (theta.size() != param_count()) throw ShapeError("objective: parameter count mismatch");
    const auto batch = select(idx);
    const auto layout = operator_layout(spec_);
    if (!grad) {
      OperatorArrays<Array> arrays;
      for (std::size_t i = 0; i < spec_.branches.size(); ++i)
        arrays.branches.push_back(dense_arrays(spec_.branches[i], theta.subspan(layout.branch_offset[i], pidon::param_count(spec_.branches[i]))));
      arrays.trunk = dense_arrays(spec_.trunk, theta.subspan(layout.trunk_offset, pidon::param_count(spec_.trunk)));
      auto be = onet_backend<Array>(spec_, arrays, batch, problem_.spatial(), identity_lift);
      return loss_values(physics_loss(problem_, be));
    }
    tape_.reset();
    OperatorArrays<ArrayVar> arrays;
    for (std::size_t i = 0; i < spec_.branches.size(); ++i)
      arrays.branches.push_back(leaf_layers(tape_, spec_.branches[i], theta.subspan(layout.branch_offset[i], pidon::param_count(spec_.branches[i]))));
    arrays.trunk = leaf_layers(tape_, spec_.trunk, theta.subspan(layout.trunk_offset, pidon::param_count(spec_.trunk)));
    ArrayTape* tape = &tape_;
    auto be = onet_backend<ArrayVar>(spec_, arrays, batch, problem_.spatial(),
                                     [tape](const Array& a) { return tape->constant(a); });
    const auto rep = physics_loss(problem_, be);
    tape_.backward(rep.total);
    grad->assign(param_count(), 0.0);
    for (std::size_t i = 0; i < spec_.branches.size(); ++i)
      gather_layer_grads(tape_, spec_.branches[i], arrays.branches[i], *grad, layout.branch_offset[i]);
    gather_layer_grads(tape_, spec_.trunk, arrays.trunk, *grad, layout.trunk_offset);
    return loss_values(rep);
  }

  /// Same loss and gradient through the scalar tape, one point at a time.
  /// Slow; used to cross-check the batched route.
  LossValues evaluate_scalar(std::span<const double> theta, const std::vector<int>& idx, std::vector<double>* grad) {
    const auto batch = select(idx);
    Tape tape;
    std::vector<TapeVar> leaves;
    leaves.reserve(theta.size());
    for (double v : theta) leaves.push_back(grad ? tape.variable(v) : TapeVar(v));
    PointwiseBackend<TapeVar> be(batch, problem_.spatial(),
                                 onet_pointwise_model<TapeVar>(spec_, std::span<const TapeVar>(leaves), batch));
    const auto rep = physics_loss(problem_, be);
    if (grad) *grad = tape_backward(tape, rep.total, leaves);
    return loss_values(rep);
  }

 private:
  std::vector<const Sample*> select(const std::vector<int>& idx) const {
    if (idx.empty()) throw ShapeError("objective over an empty batch");
    std::vector<const Sample*> batch;
    batch.reserve(idx.size());
    for (int i : idx) batch.push_back(&data_->samples.at(static_cast<std::size_t>(i)));
    return batch;
  }

  ProblemSpec problem_;
  OperatorNetSpec spec_;
  const TrainSet* data_;
  ArrayTape tape_;
};

// ---------------------------------------------------------------------------
// Training loop.

struct TrainRecord {
  long iteration = 0;
  LossValues loss;
  double lr = 0.0;
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<TrainRecord> records;

  /// iteration, loss_total, loss_ic, loss_bc, loss_r, loss_data, lr. Absent
  /// terms are written as 0. Numbers use the classic locale.
  void write_csv(std::ostream& os) const {
    std::ostringstream out;
    out.imbue(std::locale::classic());
    out.precision(17);
    out << "iteration,loss_total,loss_ic,loss_bc,loss_r,loss_data,lr\n";
    for (const auto& r : records)
      out << r.iteration << ',' << r.loss.total << ',' << r.loss.raw[kIcTerm] << ',' << r.loss.raw[kBcTerm] << ','
          << r.loss.raw[kResidualTerm] << ',' << r.loss.raw[kDataTerm] << ',' << r.lr << '\n';
    os << out.str();
  }
};

struct TrainOptions {
  long iters = 0;
  int batch_size = 1;
  std::uint64_t seed = 0;
  double lr0 = 1e-3;
  double decay_rate = 0.9;
  long decay_every = 5000;
  long log_every = 100;
  double clip_norm = 0.0;  // global-norm gradient clip; 0 disables
  std::function<void(const TrainRecord&)> on_log;
};

struct TrainState {
  std::vector<double> params;
  OptimState opt;
  TrainLog log;
};

/// Draws batch indices without replacement from a persistent permutation.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(derived_stream(seed, 0, 0x62617463u)) {
    std::iota(order_.begin(), order_.end(), 0);
  }

  std::vector<int> next(int size) {
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(size), order_.size());
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, order_.size() - 1);
      std::swap(order_[i], order_[pick(rng_)]);
    }
    return {order_.begin(), order_.begin() + static_cast<std::ptrdiff_t>(k)};
  }

 private:
  std::vector<int> order_;
  std::mt19937_64 rng_;
};

/// Runs opts.iters Adam iterations on state.params. Objective provides
/// sample_count(), param_count() and evaluate(theta, idx, grad*).
///
/// On a non-finite loss the parameters and optimizer state that last gave a
/// finite loss are restored and TrainingDivergedError is thrown.
template <class Objective>
void train_inplace(Objective& obj, TrainState& state, const TrainOptions& opts) {
  if (obj.sample_count() == 0) throw ConfigError("training set is empty");
  if (opts.batch_size < 1) throw ConfigError("batch size must be positive");
  if (state.params.size() != obj.param_count()) throw ShapeError("train: parameter count mismatch");
  if (state.opt.m.size() != state.params.size()) {
    state.opt = OptimState::for_params(state.params.size(), opts.lr0);
  }
  state.opt.lr0 = opts.lr0;
  state.opt.decay_rate = opts.decay_rate;
  state.opt.decay_every = opts.decay_every;

  BatchSampler sampler(obj.sample_count(), opts.seed);
  const auto start = std::chrono::steady_clock::now();
  std::vector<double> grad;
  std::vector<double> last_params;
  OptimState last_opt;
  const long first = state.opt.step;
  for (long it = 0; it < opts.iters; ++it) {
    const auto idx = sampler.next(opts.batch_size);
    const LossValues loss = obj.evaluate(state.params, idx, &grad);
    const long global = first + it;
    if (!std::isfinite(loss.total)) {
      if (it > 0) {
        state.params = std::move(last_params);
        state.opt = std::move(last_opt);
      }
      throw TrainingDivergedError("non-finite loss at iteration " + std::to_string(global), global);
    }
    if (opts.clip_norm > 0.0) {
      double n2 = 0.0;
      for (double g : grad) n2 += g * g;
      const double n = std::sqrt(n2);
      if (n > opts.clip_norm)
        for (double& g : grad) g *= opts.clip_norm / n;
    }
    const bool log_now = opts.log_every > 0 && (it % opts.log_every == 0 || it + 1 == opts.iters);
    if (log_now) {
      TrainRecord r{global, loss, learning_rate(state.opt, state.opt.step),
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
      state.log.records.push_back(r);
      if (opts.on_log) opts.on_log(r);
    }
    last_params = state.params;
    last_opt = state.opt;
    adam_step(state.params, grad, state.opt);
  }
}

template <class Objective>
TrainState train(Objective& obj, std::vector<double> params, const TrainOptions& opts) {
  TrainState s{std::move(params), OptimState::for_params(obj.param_count(), opts.lr0), {}};
  train_inplace(obj, s, opts);
  return s;
}

/// Trains an operator net on a problem's training set.
inline TrainState train(const ProblemSpec& problem, const OperatorNet& net, const TrainSet& data,
                        const TrainOptions& opts) {
  OnetObjective obj(problem, net.spec, data);
  return train(obj, net.params, opts);
}

}  // namespace pidon
