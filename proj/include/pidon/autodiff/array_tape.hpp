#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "pidon/autodiff/elementwise.hpp"
#include "pidon/errors.hpp"

namespace pidon {

class ArrayTape;

/// Reverse-mode variable whose value is a 2-D array (rows = points,
/// cols = features). Used for batched network evaluation during training.
class ArrayVar {
 public:
  ArrayVar() = default;

  const Array& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  int id() const { return id_; }
  ArrayTape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class ArrayTape;
  ArrayVar(int id, ArrayTape* tape) : id_(id), tape_(tape) {}

  int id_ = -1;
  ArrayTape* tape_ = nullptr;
};

/// Tape over array-valued operations.
///
/// Nodes live in a deque that is never shrunk: reset() rewinds the cursor and
/// later recordings overwrite the old nodes in place, so buffers of matching
/// shape are reused across training iterations.
class ArrayTape {
 public:
  enum class Op : std::uint8_t {
    kLeaf,
    kConstant,
    kAdd,
    kSub,
    kMul,
    kDiv,
    kNeg,
    kAddScalar,
    kMulScalar,
    kMatMul,
    kAddRow,
    kTanh,
    kSin,
    kCos,
    kExp,
    kSquare,
    kGatherRows,
    kColBlockSum,
    kMean,
    kSum,
  };

  ArrayVar leaf(const Array& value) { return push_value(Op::kLeaf, value, true); }
  ArrayVar constant(const Array& value) { return push_value(Op::kConstant, value, false); }
  ArrayVar constant(Eigen::Index rows, Eigen::Index cols, double fill) {
    Node& n = push(Op::kConstant, -1, -1, false);
    n.value.setConstant(rows, cols, fill);
    return var(count_ - 1);
  }

  void reset() { count_ = 0; }
  std::size_t size() const { return count_; }

  const Array& value(const ArrayVar& v) const { return node(v).value; }

  /// Accumulates adjoints from a 1x1 root. Earlier adjoints are discarded.
  void backward(const ArrayVar& root);

  /// Adjoint of v after backward(); zeros if v does not influence the root.
  Array grad(const ArrayVar& v) const {
    const Node& n = node(v);
    if (!n.has_adj) return Array::Zero(n.value.rows(), n.value.cols());
    return n.adj;
  }

  // Recording entry points for the free-function operators below.
  ArrayVar binary(Op op, const ArrayVar& a, const ArrayVar& b);
  ArrayVar unary(Op op, const ArrayVar& a, double s = 0.0);
  ArrayVar matmul(const ArrayVar& x, const ArrayVar& w);
  ArrayVar add_row(const ArrayVar& x, const ArrayVar& bias);
  ArrayVar gather_rows(const ArrayVar& x, const std::vector<int>& index);
  ArrayVar col_block_sum(const ArrayVar& x, Eigen::Index begin, Eigen::Index end);

 private:
  struct Node {
    Op op = Op::kConstant;
    int a = -1;
    int b = -1;
    double s = 0.0;
    bool needs_grad = false;
    bool has_adj = false;
    Eigen::Index begin = 0;
    Eigen::Index end = 0;
    std::vector<int> index;
    Array value;
    Array adj;
  };

  const Node& node(const ArrayVar& v) const {
    check(v);
    return nodes_[static_cast<std::size_t>(v.id())];
  }
  Node& at(int id) { return nodes_[static_cast<std::size_t>(id)]; }

  void check(const ArrayVar& v) const {
    if (v.tape() != this) throw TapeMismatchError("array variable is not recorded on this tape");
  }

  ArrayVar var(std::size_t id) { return ArrayVar(static_cast<int>(id), this); }

  Node& push(Op op, int a, int b, bool needs_grad) {
    if (count_ == nodes_.size()) nodes_.emplace_back();
    Node& n = nodes_[count_++];
    n.op = op;
    n.a = a;
    n.b = b;
    n.s = 0.0;
    n.needs_grad = needs_grad;
    n.has_adj = false;
    return n;
  }

  ArrayVar push_value(Op op, const Array& value, bool needs_grad) {
    Node& n = push(op, -1, -1, needs_grad);
    n.value = value;
    return var(count_ - 1);
  }

  template <class Expr>
  void accumulate(int id, const Expr& g) {
    Node& n = at(id);
    if (!n.needs_grad) return;
    if (n.has_adj) {
      n.adj += g;
    } else {
      n.adj = g;
      n.has_adj = true;
    }
  }

  static void same_shape(const Array& a, const Array& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
      throw ShapeError(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                       std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                       std::to_string(b.cols()));
  }

  std::deque<Node> nodes_;
  std::size_t count_ = 0;
};

inline const Array& ArrayVar::value() const { return tape_->value(*this); }

inline ArrayVar ArrayTape::binary(Op op, const ArrayVar& a, const ArrayVar& b) {
  check(a);
  check(b);
  const Node& na = nodes_[static_cast<std::size_t>(a.id())];
  const Node& nb = nodes_[static_cast<std::size_t>(b.id())];
  same_shape(na.value, nb.value, "elementwise op");
  const bool ng = na.needs_grad || nb.needs_grad;
  Node& n = push(op, a.id(), b.id(), ng);
  const Array& va = at(a.id()).value;
  const Array& vb = at(b.id()).value;
  switch (op) {
    case Op::kAdd: n.value = va + vb; break;
    case Op::kSub: n.value = va - vb; break;
    case Op::kMul: n.value = va * vb; break;
    case Op::kDiv: n.value = va / vb; break;
    default: throw std::logic_error("not a binary op");
  }
  return var(count_ - 1);
}

inline ArrayVar ArrayTape::unary(Op op, const ArrayVar& a, double s) {
  check(a);
  const bool ng = at(a.id()).needs_grad;
  Node& n = push(op, a.id(), -1, ng);
  n.s = s;
  const Array& va = at(a.id()).value;
  switch (op) {
    case Op::kNeg: n.value = -va; break;
    case Op::kAddScalar: n.value = va + s; break;
    case Op::kMulScalar: n.value = va * s; break;
    case Op::kTanh: n.value = pidon::tanh(va); break;
    case Op::kSin: n.value = va.sin(); break;
    case Op::kCos: n.value = va.cos(); break;
    case Op::kExp: n.value = va.exp(); break;
    case Op::kSquare: n.value = va.square(); break;
    case Op::kMean: n.value.setConstant(1, 1, va.mean()); break;
    case Op::kSum: n.value.setConstant(1, 1, va.sum()); break;
    default: throw std::logic_error("not a unary op");
  }
  return var(count_ - 1);
}

inline ArrayVar ArrayTape::matmul(const ArrayVar& x, const ArrayVar& w) {
  check(x);
  check(w);
  const Eigen::Index rows = at(x.id()).value.rows();
  const Eigen::Index inner = at(x.id()).value.cols();
  const Eigen::Index cols = at(w.id()).value.cols();
  if (at(w.id()).value.rows() != inner)
    throw ShapeError("matmul: inner dimensions " + std::to_string(inner) + " vs " +
                     std::to_string(at(w.id()).value.rows()));
  const bool ng = at(x.id()).needs_grad || at(w.id()).needs_grad;
  Node& n = push(Op::kMatMul, x.id(), w.id(), ng);
  n.value.resize(rows, cols);
  n.value.matrix().noalias() = at(x.id()).value.matrix() * at(w.id()).value.matrix();
  return var(count_ - 1);
}

inline ArrayVar ArrayTape::add_row(const ArrayVar& x, const ArrayVar& bias) {
  check(x);
  check(bias);
  if (at(bias.id()).value.rows() != 1 || at(bias.id()).value.cols() != at(x.id()).value.cols())
    throw ShapeError("add_row: bias must be 1 x cols");
  const bool ng = at(x.id()).needs_grad || at(bias.id()).needs_grad;
  Node& n = push(Op::kAddRow, x.id(), bias.id(), ng);
  n.value = at(x.id()).value.rowwise() + at(bias.id()).value.row(0);
  return var(count_ - 1);
}

inline ArrayVar ArrayTape::gather_rows(const ArrayVar& x, const std::vector<int>& index) {
  check(x);
  const Eigen::Index src_rows = at(x.id()).value.rows();
  for (int i : index)
    if (i < 0 || i >= src_rows) throw ShapeError("gather_rows: index out of range");
  Node& n = push(Op::kGatherRows, x.id(), -1, at(x.id()).needs_grad);
  n.index = index;
  const Array& src = at(x.id()).value;
  n.value.resize(static_cast<Eigen::Index>(index.size()), src.cols());
  for (std::size_t r = 0; r < index.size(); ++r)
    n.value.row(static_cast<Eigen::Index>(r)) = src.row(index[r]);
  return var(count_ - 1);
}

inline ArrayVar ArrayTape::col_block_sum(const ArrayVar& x, Eigen::Index begin, Eigen::Index end) {
  check(x);
  if (begin < 0 || end > at(x.id()).value.cols() || begin >= end)
    throw ShapeError("col_block_sum: invalid column range");
  Node& n = push(Op::kColBlockSum, x.id(), -1, at(x.id()).needs_grad);
  n.begin = begin;
  n.end = end;
  n.value = at(x.id()).value.middleCols(begin, end - begin).rowwise().sum();
  return var(count_ - 1);
}

inline void ArrayTape::backward(const ArrayVar& root) {
  check(root);
  Node& r = at(root.id());
  if (r.value.size() != 1) throw ShapeError("backward root must be 1x1");
  for (std::size_t i = 0; i < count_; ++i) nodes_[i].has_adj = false;
  r.adj.setOnes(1, 1);
  r.has_adj = true;
  for (int i = root.id(); i >= 0; --i) {
    Node& n = at(i);
    if (!n.needs_grad || !n.has_adj) continue;
    const Array& g = n.adj;
    switch (n.op) {
      case Op::kLeaf:
      case Op::kConstant: break;
      case Op::kAdd:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::kSub:
        accumulate(n.a, g);
        accumulate(n.b, -g);
        break;
      case Op::kMul:
        accumulate(n.a, g * at(n.b).value);
        accumulate(n.b, g * at(n.a).value);
        break;
      case Op::kDiv:
        accumulate(n.a, g / at(n.b).value);
        accumulate(n.b, -g * n.value / at(n.b).value);
        break;
      case Op::kNeg: accumulate(n.a, -g); break;
      case Op::kAddScalar: accumulate(n.a, g); break;
      case Op::kMulScalar: accumulate(n.a, g * n.s); break;
      case Op::kMatMul: {
        const Array& x = at(n.a).value;
        const Array& w = at(n.b).value;
        if (at(n.a).needs_grad) {
          Array gx(x.rows(), x.cols());
          gx.matrix().noalias() = g.matrix() * w.matrix().transpose();
          accumulate(n.a, gx);
        }
        if (at(n.b).needs_grad) {
          Array gw(w.rows(), w.cols());
          gw.matrix().noalias() = x.matrix().transpose() * g.matrix();
          accumulate(n.b, gw);
        }
        break;
      }
      case Op::kAddRow:
        accumulate(n.a, g);
        accumulate(n.b, g.colwise().sum());
        break;
      case Op::kTanh: accumulate(n.a, g * (1.0 - n.value.square())); break;
      case Op::kSin: accumulate(n.a, g * at(n.a).value.cos()); break;
      case Op::kCos: accumulate(n.a, -g * at(n.a).value.sin()); break;
      case Op::kExp: accumulate(n.a, g * n.value); break;
      case Op::kSquare: accumulate(n.a, 2.0 * g * at(n.a).value); break;
      case Op::kGatherRows: {
        Node& src = at(n.a);
        if (!src.needs_grad) break;
        if (!src.has_adj) {
          src.adj.setZero(src.value.rows(), src.value.cols());
          src.has_adj = true;
        }
        for (std::size_t k = 0; k < n.index.size(); ++k)
          src.adj.row(n.index[k]) += g.row(static_cast<Eigen::Index>(k));
        break;
      }
      case Op::kColBlockSum: {
        Node& src = at(n.a);
        if (!src.needs_grad) break;
        if (!src.has_adj) {
          src.adj.setZero(src.value.rows(), src.value.cols());
          src.has_adj = true;
        }
        src.adj.middleCols(n.begin, n.end - n.begin).colwise() += g.col(0);
        break;
      }
      case Op::kMean: {
        const Array& v = at(n.a).value;
        accumulate(n.a, Array::Constant(v.rows(), v.cols(), g(0, 0) / static_cast<double>(v.size())));
        break;
      }
      case Op::kSum: {
        const Array& v = at(n.a).value;
        accumulate(n.a, Array::Constant(v.rows(), v.cols(), g(0, 0)));
        break;
      }
    }
  }
}

using ArrayOp = ArrayTape::Op;

inline ArrayVar operator+(const ArrayVar& a, const ArrayVar& b) {
  return a.tape()->binary(ArrayOp::kAdd, a, b);
}
inline ArrayVar operator-(const ArrayVar& a, const ArrayVar& b) {
  return a.tape()->binary(ArrayOp::kSub, a, b);
}
inline ArrayVar operator*(const ArrayVar& a, const ArrayVar& b) {
  return a.tape()->binary(ArrayOp::kMul, a, b);
}
inline ArrayVar operator/(const ArrayVar& a, const ArrayVar& b) {
  return a.tape()->binary(ArrayOp::kDiv, a, b);
}
inline ArrayVar operator-(const ArrayVar& a) { return a.tape()->unary(ArrayOp::kNeg, a); }

inline ArrayVar operator+(const ArrayVar& a, double s) {
  return a.tape()->unary(ArrayOp::kAddScalar, a, s);
}
inline ArrayVar operator+(double s, const ArrayVar& a) { return a + s; }
inline ArrayVar operator-(const ArrayVar& a, double s) { return a + (-s); }
inline ArrayVar operator-(double s, const ArrayVar& a) { return (-a) + s; }
inline ArrayVar operator*(const ArrayVar& a, double s) {
  return a.tape()->unary(ArrayOp::kMulScalar, a, s);
}
inline ArrayVar operator*(double s, const ArrayVar& a) { return a * s; }
inline ArrayVar operator/(const ArrayVar& a, double s) { return a * (1.0 / s); }

inline ArrayVar tanh(const ArrayVar& a) { return a.tape()->unary(ArrayOp::kTanh, a); }
inline ArrayVar sin(const ArrayVar& a) { return a.tape()->unary(ArrayOp::kSin, a); }
inline ArrayVar cos(const ArrayVar& a) { return a.tape()->unary(ArrayOp::kCos, a); }
inline ArrayVar exp(const ArrayVar& a) { return a.tape()->unary(ArrayOp::kExp, a); }
inline ArrayVar square(const ArrayVar& a) { return a.tape()->unary(ArrayOp::kSquare, a); }
inline ArrayVar mean(const ArrayVar& a) { return a.tape()->unary(ArrayOp::kMean, a); }
inline ArrayVar sum(const ArrayVar& a) { return a.tape()->unary(ArrayOp::kSum, a); }

inline ArrayVar matmul(const ArrayVar& x, const ArrayVar& w) { return x.tape()->matmul(x, w); }
inline ArrayVar add_row(const ArrayVar& x, const ArrayVar& b) { return x.tape()->add_row(x, b); }
inline ArrayVar gather_rows(const ArrayVar& x, const std::vector<int>& index) {
  return x.tape()->gather_rows(x, index);
}
inline ArrayVar col_block_sum(const ArrayVar& x, Eigen::Index begin, Eigen::Index end) {
  return x.tape()->col_block_sum(x, begin, end);
}

inline ArrayVar one_like(const ArrayVar& a) { return a.tape()->constant(a.rows(), a.cols(), 1.0); }
inline ArrayVar zero_like(const ArrayVar& a) { return a.tape()->constant(a.rows(), a.cols(), 0.0); }
inline bool any_zero(const ArrayVar& a) { return (a.value() == 0.0).any(); }

// Plain-array counterparts so batched network code can run without a tape.
inline Array matmul(const Array& x, const Array& w) {
  if (x.cols() != w.rows()) throw ShapeError("matmul: inner dimensions differ");
  Array r(x.rows(), w.cols());
  r.matrix().noalias() = x.matrix() * w.matrix();
  return r;
}
inline Array add_row(const Array& x, const Array& b) {
  if (b.rows() != 1 || b.cols() != x.cols()) throw ShapeError("add_row: bias must be 1 x cols");
  return x.rowwise() + b.row(0);
}
inline Array gather_rows(const Array& x, const std::vector<int>& index) {
  Array r(static_cast<Eigen::Index>(index.size()), x.cols());
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] < 0 || index[k] >= x.rows()) throw ShapeError("gather_rows: index out of range");
    r.row(static_cast<Eigen::Index>(k)) = x.row(index[k]);
  }
  return r;
}
inline Array col_block_sum(const Array& x, Eigen::Index begin, Eigen::Index end) {
  if (begin < 0 || end > x.cols() || begin >= end) throw ShapeError("col_block_sum: invalid column range");
  return x.middleCols(begin, end - begin).rowwise().sum();
}
inline Array mean(const Array& a) { return Array::Constant(1, 1, a.mean()); }

}  // namespace pidon
