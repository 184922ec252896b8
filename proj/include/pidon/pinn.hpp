#pragma once

#include <random>
#include <vector>

#include "pidon/autodiff/array_tape.hpp"
#include "pidon/mlp.hpp"
#include "pidon/problems.hpp"
#include "pidon/solvers.hpp"
#include "pidon/training.hpp"

namespace pidon {

// Space-filling PINN for the pendulum: one MLP maps t in [0, T] to the state,
// trained on the initial condition and the residual at collocation points
// redrawn every iteration.

struct PinnOptions {
  int depth = 4;
  int width = 64;
  double T = 20.0;
  int collocation = 256;
  std::vector<double> u0 = {1.0, 1.0};
  std::uint64_t seed = 0;
  TrainOptions train;
};

class PinnObjective {
 public:
  PinnObjective(const ProblemSpec& pendulum, MlpSpec spec, double T, int collocation, std::vector<double> u0,
                std::uint64_t seed)
      : problem_(pendulum), spec_(spec), T_(T), collocation_(collocation), rng_(derived_stream(seed, 0, 0x70696e6eu)) {
    if (problem_.id != ProblemId::kPendulum) throw ConfigError("the PINN baseline is defined for the pendulum only");
    if (collocation < 1 || !(T > 0.0)) throw ConfigError("PINN needs T > 0 and at least one collocation point");
    validate(spec_);
    if (spec_.in_dim != 1 || spec_.out_dim != problem_.n_outputs) throw ShapeError("PINN maps t to the state vector");
    problem_.dt = T;
    sample_.u = std::move(u0);
    if (static_cast<int>(sample_.u.size()) != problem_.n_outputs) throw ShapeError("PINN initial state has wrong size");
  }

  std::size_t param_count() const { return pidon::param_count(spec_); }
  std::size_t sample_count() const { return 1; }
  const MlpSpec& spec() const { return spec_; }

  LossValues evaluate(std::span<const double> theta, const std::vector<int>&, std::vector<double>* grad) {
    std::uniform_real_distribution<double> U(0.0, T_);
    sample_.res_t.resize(static_cast<std::size_t>(collocation_));
    for (auto& t : sample_.res_t) t = U(rng_);
    const std::vector<const Sample*> batch{&sample_};
    if (!grad) {
      const auto layers = dense_arrays(spec_, theta);
      auto be = mlp_backend<Array>(spec_, layers, batch, false, identity_lift);
      return loss_values(physics_loss(problem_, be));
    }
    tape_.reset();
    const auto layers = leaf_layers(tape_, spec_, theta);
    ArrayTape* tape = &tape_;
    auto be = mlp_backend<ArrayVar>(spec_, layers, batch, false, [tape](const Array& a) { return tape->constant(a); });
    const auto rep = physics_loss(problem_, be);
    tape_.backward(rep.total);
    grad->assign(param_count(), 0.0);
    gather_layer_grads(tape_, spec_, layers, *grad, 0);
    return loss_values(rep);
  }

 private:
  ProblemSpec problem_;
  MlpSpec spec_;
  double T_;
  int collocation_;
  std::mt19937_64 rng_;
  Sample sample_;
  ArrayTape tape_;
};

struct PinnResult {
  std::vector<double> params;
  TrainLog log;
  std::vector<double> t;  // uniform evaluation grid on [0, T]
  Mat prediction;         // rows = t, cols = state components
  Mat reference;
};

/// Evaluates the PINN on a time grid.
inline Mat pinn_predict(const MlpSpec& spec, std::span<const double> theta, const std::vector<double>& t) {
  Jet<Array> q(0);
  q[0] = Eigen::Map<const Array>(t.data(), static_cast<Eigen::Index>(t.size()), 1);
  return mlp_forward_batch(spec, dense_arrays(spec, theta), q)[0].matrix();
}

inline PinnResult pinn_baseline(const ProblemSpec& pendulum, const PinnOptions& opts, int grid_points = 2001) {
  const MlpSpec spec{opts.depth, opts.width, 1, pendulum.n_outputs, MlpVariant::kStandard};
  PinnObjective obj(pendulum, spec, opts.T, opts.collocation, opts.u0, opts.seed);
  auto state = train(obj, flatten(glorot_init(spec, opts.seed)), opts.train);

  PinnResult r;
  r.params = std::move(state.params);
  r.log = std::move(state.log);
  for (int k = 0; k < grid_points; ++k) r.t.push_back(opts.T * k / (grid_points - 1));
  r.prediction = pinn_predict(spec, r.params, r.t);
  Vec s0(static_cast<Eigen::Index>(opts.u0.size()));
  for (std::size_t k = 0; k < opts.u0.size(); ++k) s0(static_cast<Eigen::Index>(k)) = opts.u0[k];
  r.reference = rk_adaptive(pendulum_system(pendulum), s0, opts.T, 1e-11, 1e-13).sample(r.t);
  return r;
}

}  // namespace pidon
