// Stiff kinetics from (1, 0, 0): the implicit solver needs about two thousand
// steps to t = 500 at rtol 1e-8; an explicit solver stalls on the fast mode.
#include <cstdio>

#include "pidon/solvers.hpp"

int main() {
  using namespace pidon;
  const auto sys = robertson_system(make_problem(ProblemId::kStiff));
  Vec s0(3);
  s0 << 1.0, 0.0, 0.0;
  const auto r = stiff_implicit(sys, s0, 500.0, 1e-8, 1e-14);
  std::printf("accepted %ld, rejected %ld\n", r.accepted, r.rejected);
  std::printf("%10s %14s %14s %14s %10s\n", "t", "s1", "s2", "s3", "sum-1");
  for (double t : {0.0, 0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 500.0}) {
    const Vec s = r.at(t);
    std::printf("%10g %14.6e %14.6e %14.6e %10.1e\n", t, s(0), s(1), s(2), s.sum() - 1.0);
  }
}
