// Rolls the exact flow map of ds/dt = -s forward 10 windows and prints the
// trajectory next to e^-t.
#include <cmath>
#include <cstdio>

#include "pidon/rollout.hpp"

int main() {
  using namespace pidon;
  Vec u0(1);
  u0 << 1.0;
  const auto r = rollout(decay_propagator(), u0, {10, 1.0, 5});
  std::printf("%6s %22s %22s\n", "t", "rollout", "exp(-t)");
  for (std::size_t k = 0; k < r.t.size(); ++k)
    std::printf("%6.2f %22.17g %22.17g\n", r.t[k], r.values(static_cast<Eigen::Index>(k), 0), std::exp(-r.t[k]));
}
