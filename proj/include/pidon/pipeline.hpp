#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "pidon/io.hpp"
#include "pidon/rollout.hpp"
#include "pidon/training.hpp"

namespace pidon {

struct TrainedModel {
  RunConfig config;
  OperatorNet net;
  TrainState state;
};

/// Draws the training set, initializes the network and trains, all from the
/// resolved configuration.
inline TrainedModel train_from_config(const RunConfig& c, std::function<void(const TrainRecord&)> on_log = {}) {
  const auto data = make_train_set(c.problem, c.N, c.data_seed);
  const OperatorNet init = init_operator_net(c.network(), c.init_seed);
  TrainOptions opts = c.train;
  if (on_log) opts.on_log = std::move(on_log);
  OnetObjective obj(c.problem, init.spec, data);
  auto state = train(obj, init.params, opts);
  OperatorNet net{init.spec, state.params};
  return {c, std::move(net), std::move(state)};
}

inline Checkpoint to_checkpoint(const TrainedModel& m) {
  return {m.config.problem, m.net, m.state.opt,
          json{{"data", m.config.data_seed}, {"init", m.config.init_seed}, {"train", m.config.train.seed}},
          m.state.opt.step};
}

struct SweepRow {
  double dt = 0.0;
  double error = 0.0;
  int diverged = 0;
  double final_loss = 0.0;
};

/// Trains one model per window length with identical budgets and reports the
/// mean rollout error at horizon T over a shared test set.
inline std::vector<SweepRow> sweep_dt(const RunConfig& base, const std::vector<double>& dts, double T, int n_test,
                                      std::uint64_t test_seed, int workers = 1,
                                      std::function<void(double, const TrainRecord&)> on_log = {}) {
  std::vector<SweepRow> rows;
  const auto cases = make_test_set(base.problem, n_test, test_seed);
  for (double dt : dts) {
    RunConfig c = base;
    c.problem.dt = dt;
    const auto m = train_from_config(c, on_log ? std::function<void(const TrainRecord&)>(
                                                     [&on_log, dt](const TrainRecord& r) { on_log(dt, r); })
                                               : std::function<void(const TrainRecord&)>());
    const auto h = error_vs_horizon(c.problem, net_rollout(c.problem, m.net), problem_reference(c.problem), cases, {T},
                                    11, workers);
    rows.push_back({dt, h[0].mean_error, h[0].diverged,
                    m.state.log.records.empty() ? 0.0 : m.state.log.records.back().loss.total});
  }
  return rows;
}

}  // namespace pidon
