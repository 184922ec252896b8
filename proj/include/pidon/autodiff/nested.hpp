#pragma once

#include <span>
#include <string>
#include <vector>

#include "pidon/autodiff/jet.hpp"
#include "pidon/autodiff/tape.hpp"
#include "pidon/errors.hpp"

namespace pidon {

/// Jets for a query point where orders[i] is the derivative order wanted
/// along coordinate i. Only one coordinate may carry a nonzero order: mixed
/// derivatives are not supported, each coordinate needs its own pass.
template <class S>
std::vector<Jet<S>> seed_query(std::span<const double> point, std::span<const int> orders) {
  if (point.size() != orders.size()) throw ShapeError("seed_query: one order per coordinate expected");
  int seeded = -1;
  int order = 0;
  for (std::size_t i = 0; i < orders.size(); ++i) {
    if (orders[i] == 0) continue;
    if (seeded >= 0) throw UnsupportedFeatureError("mixed input derivatives are not supported");
    seeded = static_cast<int>(i);
    order = Jet<S>::checked(orders[i]);
  }
  std::vector<Jet<S>> q;
  for (std::size_t i = 0; i < point.size(); ++i)
    q.push_back(static_cast<int>(i) == seeded ? Jet<S>::seed(S(point[i]), order) : Jet<S>::constant(S(point[i]), order));
  return q;
}

/// Gradient with respect to theta of a scalar loss that may contain input
/// derivatives of a network. loss receives the parameters as tape variables
/// and returns the recorded scalar.
template <class F>
std::vector<double> grad_of_input_derivative(std::span<const double> theta, F&& loss) {
  Tape tape;
  std::vector<TapeVar> leaves;
  leaves.reserve(theta.size());
  for (double v : theta) leaves.push_back(tape.variable(v));
  const TapeVar root = loss(std::span<const TapeVar>(leaves));
  if (root.is_constant()) return std::vector<double>(theta.size(), 0.0);
  return tape_backward(tape, root, leaves);
}

}  // namespace pidon
