#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "pidon/errors.hpp"

namespace pidon {

class Tape;

/// Reverse-mode scalar. A TapeVar without a tape is a constant; arithmetic
/// between constants stays off the tape.
class TapeVar {
 public:
  TapeVar() = default;
  TapeVar(double value) : value_(value) {}  // NOLINT: constants convert implicitly

  double value() const { return value_; }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool is_constant() const { return tape_ == nullptr; }

 private:
  friend class Tape;
  TapeVar(double value, int id, Tape* tape) : value_(value), id_(id), tape_(tape) {}

  double value_ = 0.0;
  int id_ = -1;
  Tape* tape_ = nullptr;
};

/// Append-only record of scalar operations. Each node keeps at most two
/// parents with their local partial derivatives; backward() walks the nodes
/// once in reverse recording order.
///
/// reset() keeps the allocated storage, so a training loop that records the
/// same computation every iteration does not allocate in steady state.
class Tape {
 public:
  enum class Op : std::uint8_t { kLeaf, kUnary, kBinary };

  struct Node {
    Op op;
    int parent[2];
    double partial[2];
  };

  TapeVar variable(double value) {
    nodes_.push_back({Op::kLeaf, {-1, -1}, {0.0, 0.0}});
    return TapeVar(value, static_cast<int>(nodes_.size()) - 1, this);
  }

  void reset() {
    nodes_.clear();
    adjoints_.clear();
  }

  std::size_t size() const { return nodes_.size(); }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

  /// Sweeps adjoints from a scalar root. Adjoints are recomputed from zero on
  /// every call, so repeated sweeps over the same recording agree exactly.
  void backward(const TapeVar& root) {
    if (root.tape() != this) throw TapeMismatchError("backward root is not recorded on this tape");
    adjoints_.assign(nodes_.size(), 0.0);
    adjoints_[static_cast<std::size_t>(root.id())] = 1.0;
    for (int i = root.id(); i >= 0; --i) {
      const double a = adjoints_[static_cast<std::size_t>(i)];
      if (a == 0.0) continue;
      const Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.op == Op::kLeaf) continue;
      adjoints_[static_cast<std::size_t>(n.parent[0])] += a * n.partial[0];
      if (n.op == Op::kBinary) adjoints_[static_cast<std::size_t>(n.parent[1])] += a * n.partial[1];
    }
  }

  /// Adjoint of v from the last backward sweep; constants have adjoint 0.
  double adjoint(const TapeVar& v) const {
    if (v.is_constant()) return 0.0;
    if (v.tape() != this) throw TapeMismatchError("variable is not recorded on this tape");
    const auto i = static_cast<std::size_t>(v.id());
    return i < adjoints_.size() ? adjoints_[i] : 0.0;
  }

  const std::vector<double>& adjoints() const { return adjoints_; }

  // Recording primitives used by the operator overloads.
  TapeVar unary(double value, const TapeVar& a, double da) {
    nodes_.push_back({Op::kUnary, {a.id(), -1}, {da, 0.0}});
    return TapeVar(value, static_cast<int>(nodes_.size()) - 1, this);
  }
  TapeVar binary(double value, const TapeVar& a, double da, const TapeVar& b, double db) {
    nodes_.push_back({Op::kBinary, {a.id(), b.id()}, {da, db}});
    return TapeVar(value, static_cast<int>(nodes_.size()) - 1, this);
  }

 private:
  std::vector<Node> nodes_;
  std::vector<double> adjoints_;
};

namespace detail {

// Records r = f(a, b) with partials (da, db), dropping constant operands.
inline TapeVar record(double value, const TapeVar& a, double da, const TapeVar& b, double db) {
  if (a.is_constant() && b.is_constant()) return TapeVar(value);
  if (a.is_constant()) return b.tape()->unary(value, b, db);
  if (b.is_constant()) return a.tape()->unary(value, a, da);
  if (a.tape() != b.tape()) throw TapeMismatchError("operands recorded on different tapes");
  return a.tape()->binary(value, a, da, b, db);
}

inline TapeVar record(double value, const TapeVar& a, double da) {
  if (a.is_constant()) return TapeVar(value);
  return a.tape()->unary(value, a, da);
}

}  // namespace detail

inline TapeVar operator+(const TapeVar& a, const TapeVar& b) {
  return detail::record(a.value() + b.value(), a, 1.0, b, 1.0);
}
inline TapeVar operator-(const TapeVar& a, const TapeVar& b) {
  return detail::record(a.value() - b.value(), a, 1.0, b, -1.0);
}
inline TapeVar operator*(const TapeVar& a, const TapeVar& b) {
  return detail::record(a.value() * b.value(), a, b.value(), b, a.value());
}
inline TapeVar operator/(const TapeVar& a, const TapeVar& b) {
  if (b.value() == 0.0) throw SingularityError("tape division by zero");
  const double r = a.value() / b.value();
  return detail::record(r, a, 1.0 / b.value(), b, -r / b.value());
}
inline TapeVar operator-(const TapeVar& a) { return detail::record(-a.value(), a, -1.0); }

inline TapeVar operator+(const TapeVar& a, double s) { return detail::record(a.value() + s, a, 1.0); }
inline TapeVar operator+(double s, const TapeVar& a) { return a + s; }
inline TapeVar operator-(const TapeVar& a, double s) { return detail::record(a.value() - s, a, 1.0); }
inline TapeVar operator-(double s, const TapeVar& a) { return detail::record(s - a.value(), a, -1.0); }
inline TapeVar operator*(const TapeVar& a, double s) { return detail::record(a.value() * s, a, s); }
inline TapeVar operator*(double s, const TapeVar& a) { return a * s; }
inline TapeVar operator/(const TapeVar& a, double s) { return a * (1.0 / s); }

inline TapeVar& operator+=(TapeVar& a, const TapeVar& b) { return a = a + b; }
inline TapeVar& operator-=(TapeVar& a, const TapeVar& b) { return a = a - b; }
inline TapeVar& operator*=(TapeVar& a, const TapeVar& b) { return a = a * b; }

inline TapeVar tanh(const TapeVar& a) {
  const double y = std::tanh(a.value());
  return detail::record(y, a, 1.0 - y * y);
}
inline TapeVar sin(const TapeVar& a) {
  return detail::record(std::sin(a.value()), a, std::cos(a.value()));
}
inline TapeVar cos(const TapeVar& a) {
  return detail::record(std::cos(a.value()), a, -std::sin(a.value()));
}
inline TapeVar exp(const TapeVar& a) {
  const double e = std::exp(a.value());
  return detail::record(e, a, e);
}
inline TapeVar square(const TapeVar& a) {
  return detail::record(a.value() * a.value(), a, 2.0 * a.value());
}

inline TapeVar one_like(const TapeVar&) { return TapeVar(1.0); }
inline TapeVar zero_like(const TapeVar&) { return TapeVar(0.0); }
inline bool any_zero(const TapeVar& a) { return a.value() == 0.0; }
inline double value_of(const TapeVar& a) { return a.value(); }
inline double value_of(double a) { return a; }

/// Runs a backward sweep from root and returns the adjoints of the given
/// leaves in order.
inline std::vector<double> tape_backward(Tape& tape, const TapeVar& root,
                                         const std::vector<TapeVar>& leaves) {
  tape.backward(root);
  std::vector<double> out;
  out.reserve(leaves.size());
  for (const auto& l : leaves) out.push_back(tape.adjoint(l));
  return out;
}

}  // namespace pidon
