// Trains a small pendulum operator for a few thousand iterations, then rolls
// it out from (1, 1) and compares with the reference solver.
#include <cstdio>

#include "pidon/pidon.hpp"

int main(int argc, char** argv) {
  using namespace pidon;
  RunConfig c;
  c.problem = make_problem(ProblemId::kPendulum);
  c.problem.Q = 50;
  c.branch = c.trunk = {3, 32, MlpVariant::kModified};
  c.q = 32;
  c.N = 500;
  c.train.iters = argc > 1 ? std::atol(argv[1]) : 3000;
  c.train.batch_size = 20;
  c.train.log_every = 500;
  const auto m = train_from_config(c, [](const TrainRecord& r) {
    std::printf("iter %5ld  loss %.3e  (%.1f s)\n", r.iteration, r.loss.total, r.wall_seconds);
  });

  Vec u0(2);
  u0 << 1.0, 1.0;
  const auto r = rollout(onet_propagator(c.problem, m.net), u0, {10, c.problem.dt, 11});
  const Mat ref = reference_solution(c.problem, {u0, 0.0, std::nullopt, {}}, r.t);
  std::printf("\n%5s %10s %10s %10s %10s\n", "t", "s1", "s1 ref", "s2", "s2 ref");
  for (std::size_t k = 0; k < r.t.size(); k += 5)
    std::printf("%5.1f %10.4f %10.4f %10.4f %10.4f\n", r.t[k], r.values(k, 0), ref(k, 0), r.values(k, 1), ref(k, 1));
  std::printf("\nrelative L2 error over [0, 10]: %.4f\n", rel_l2(r.values, ref));
}
