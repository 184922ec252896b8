#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "pidon/autodiff/array_tape.hpp"
#include "pidon/autodiff/jet.hpp"
#include "pidon/autodiff/tape.hpp"
#include "pidon/errors.hpp"

namespace pidon {

enum class MlpVariant { kStandard, kModified };

/// Shape of a fully connected tanh network.
///
/// Standard: `depth` hidden tanh layers, then an affine output layer.
/// Modified (gated): two encoders U = tanh(X W1 + b1), V = tanh(X W2 + b2),
/// then `depth` gate layers Z = tanh(H Wz + bz) with H <- (1 - Z) U + Z V,
/// starting from H = X, then an affine output layer.
struct MlpSpec {
  int depth = 1;
  int width = 1;
  int in_dim = 1;
  int out_dim = 1;
  MlpVariant variant = MlpVariant::kStandard;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

inline void validate(const MlpSpec& s) {
  if (s.depth < 1 || s.width < 1 || s.in_dim < 1 || s.out_dim < 1)
    throw ConfigError("MLP dimensions must be positive (depth " + std::to_string(s.depth) +
                      ", width " + std::to_string(s.width) + ", in " + std::to_string(s.in_dim) +
                      ", out " + std::to_string(s.out_dim) + ")");
}

/// One affine map inside the flat parameter vector: W is stored row-major
/// (in x out) at `offset`, followed by the bias (out).
struct DenseShape {
  int in = 0;
  int out = 0;
  std::size_t offset = 0;

  std::size_t weight_offset() const { return offset; }
  std::size_t bias_offset() const { return offset + static_cast<std::size_t>(in) * out; }
  std::size_t size() const { return static_cast<std::size_t>(in + 1) * out; }
};

/// Dense layers in storage order. Standard: hidden..., output. Modified:
/// encoder U, encoder V, gates..., output.
inline std::vector<DenseShape> dense_layout(const MlpSpec& s, std::size_t base = 0) {
  validate(s);
  std::vector<DenseShape> layers;
  std::size_t off = base;
  auto add = [&](int in, int out) {
    layers.push_back({in, out, off});
    off += layers.back().size();
  };
  if (s.variant == MlpVariant::kModified) {
    add(s.in_dim, s.width);
    add(s.in_dim, s.width);
  }
  for (int k = 0; k < s.depth; ++k) add(k == 0 ? s.in_dim : s.width, s.width);
  add(s.width, s.out_dim);
  return layers;
}

inline std::size_t param_count(const MlpSpec& s) {
  std::size_t n = 0;
  for (const auto& d : dense_layout(s)) n += d.size();
  return n;
}

/// Structured view of one network's parameters.
struct ParamSet {
  MlpSpec spec;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::RowVectorXd> biases;
};

inline ParamSet unflatten(const MlpSpec& spec, std::span<const double> flat) {
  const auto layout = dense_layout(spec);
  if (flat.size() != param_count(spec)) throw ShapeError("unflatten: parameter count mismatch");
  ParamSet p{spec, {}, {}};
  for (const auto& d : layout) {
    Eigen::MatrixXd w(d.in, d.out);
    for (int i = 0; i < d.in; ++i)
      for (int j = 0; j < d.out; ++j) w(i, j) = flat[d.weight_offset() + static_cast<std::size_t>(i) * d.out + j];
    Eigen::RowVectorXd b(d.out);
    for (int j = 0; j < d.out; ++j) b(j) = flat[d.bias_offset() + static_cast<std::size_t>(j)];
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  return p;
}

inline std::vector<double> flatten(const ParamSet& p) {
  const auto layout = dense_layout(p.spec);
  if (p.weights.size() != layout.size() || p.biases.size() != layout.size())
    throw ShapeError("flatten: layer count mismatch");
  std::vector<double> flat(param_count(p.spec));
  for (std::size_t l = 0; l < layout.size(); ++l) {
    const auto& d = layout[l];
    if (p.weights[l].rows() != d.in || p.weights[l].cols() != d.out || p.biases[l].size() != d.out)
      throw ShapeError("flatten: layer " + std::to_string(l) + " has the wrong shape");
    for (int i = 0; i < d.in; ++i)
      for (int j = 0; j < d.out; ++j)
        flat[d.weight_offset() + static_cast<std::size_t>(i) * d.out + j] = p.weights[l](i, j);
    for (int j = 0; j < d.out; ++j) flat[d.bias_offset() + static_cast<std::size_t>(j)] = p.biases[l](j);
  }
  return flat;
}

/// Glorot-normal weights, N(0, 2 / (fan_in + fan_out)), and zero biases.
inline void glorot_fill(const MlpSpec& spec, std::span<double> out, std::mt19937_64& rng) {
  if (out.size() != param_count(spec)) throw ShapeError("glorot_fill: parameter count mismatch");
  for (const auto& d : dense_layout(spec)) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / (d.in + d.out)));
    for (std::size_t k = 0; k < static_cast<std::size_t>(d.in) * d.out; ++k)
      out[d.weight_offset() + k] = normal(rng);
    for (int j = 0; j < d.out; ++j) out[d.bias_offset() + static_cast<std::size_t>(j)] = 0.0;
  }
}

inline ParamSet glorot_init(const MlpSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> flat(param_count(spec));
  glorot_fill(spec, flat, rng);
  return unflatten(spec, flat);
}

// ---------------------------------------------------------------------------
// Pointwise forward pass, generic over the scalar types (double, Jet<double>,
// TapeVar, Jet<TapeVar>). This is the reference route.

template <class X, class P>
using ProductType = std::decay_t<decltype(std::declval<X>() * std::declval<P>())>;

namespace detail {

template <class R, class X, class P>
std::vector<R> dense(const DenseShape& d, std::span<const P> theta, std::span<const X> x) {
  std::vector<R> out;
  out.reserve(static_cast<std::size_t>(d.out));
  for (int j = 0; j < d.out; ++j) {
    R acc = x[0] * theta[d.weight_offset() + static_cast<std::size_t>(j)];
    for (int i = 1; i < d.in; ++i)
      acc = acc + x[static_cast<std::size_t>(i)] * theta[d.weight_offset() + static_cast<std::size_t>(i) * d.out + j];
    out.push_back(acc + theta[d.bias_offset() + static_cast<std::size_t>(j)]);
  }
  return out;
}

template <class R>
void tanh_inplace(std::vector<R>& v) {
  for (auto& e : v) e = tanh(e);
}

}  // namespace detail

/// Evaluates one network at one input. theta is the network's flat
/// parameter block (see dense_layout).
template <class X, class P>
std::vector<ProductType<X, P>> mlp_forward(const MlpSpec& spec, std::span<const P> theta,
                                           std::span<const X> x) {
  using R = ProductType<X, P>;
  if (x.size() != static_cast<std::size_t>(spec.in_dim))
    throw ShapeError("mlp_forward: input has " + std::to_string(x.size()) + " entries, expected " +
                     std::to_string(spec.in_dim));
  if (theta.size() != param_count(spec)) throw ShapeError("mlp_forward: parameter count mismatch");
  const auto layout = dense_layout(spec);

  if (spec.variant == MlpVariant::kStandard) {
    auto h = detail::dense<R, X, P>(layout[0], theta, x);
    detail::tanh_inplace(h);
    for (int k = 1; k < spec.depth; ++k) {
      h = detail::dense<R, R, P>(layout[static_cast<std::size_t>(k)], theta, std::span<const R>(h));
      detail::tanh_inplace(h);
    }
    return detail::dense<R, R, P>(layout.back(), theta, std::span<const R>(h));
  }

  auto u = detail::dense<R, X, P>(layout[0], theta, x);
  auto v = detail::dense<R, X, P>(layout[1], theta, x);
  detail::tanh_inplace(u);
  detail::tanh_inplace(v);
  std::vector<R> diff;
  diff.reserve(u.size());
  for (std::size_t j = 0; j < u.size(); ++j) diff.push_back(v[j] - u[j]);

  std::vector<R> h;
  for (int k = 0; k < spec.depth; ++k) {
    const auto& d = layout[static_cast<std::size_t>(2 + k)];
    auto z = k == 0 ? detail::dense<R, X, P>(d, theta, x)
                    : detail::dense<R, R, P>(d, theta, std::span<const R>(h));
    detail::tanh_inplace(z);
    h.clear();
    for (std::size_t j = 0; j < z.size(); ++j) h.push_back(u[j] + z[j] * diff[j]);
  }
  return detail::dense<R, R, P>(layout.back(), theta, std::span<const R>(h));
}

template <class X>
std::vector<X> mlp_forward(const ParamSet& params, std::span<const X> x) {
  const auto flat = flatten(params);
  return mlp_forward<X, double>(params.spec, std::span<const double>(flat), x);
}

// ---------------------------------------------------------------------------
// Batched forward pass: rows are points, T is Array (plain) or ArrayVar
// (recorded on a tape).

template <class T>
struct DenseArrays {
  T weight;  // in x out
  T bias;    // 1 x out
};

inline std::vector<DenseArrays<Array>> dense_arrays(const MlpSpec& spec, std::span<const double> theta) {
  std::vector<DenseArrays<Array>> out;
  for (const auto& d : dense_layout(spec)) {
    Array w(d.in, d.out);
    for (int i = 0; i < d.in; ++i)
      for (int j = 0; j < d.out; ++j) w(i, j) = theta[d.weight_offset() + static_cast<std::size_t>(i) * d.out + j];
    Array b(1, d.out);
    for (int j = 0; j < d.out; ++j) b(0, j) = theta[d.bias_offset() + static_cast<std::size_t>(j)];
    out.push_back({std::move(w), std::move(b)});
  }
  return out;
}

namespace detail {

template <class T>
Jet<T> dense_jet(const DenseArrays<T>& layer, const Jet<T>& x) {
  Jet<T> r(x.order());
  r[0] = add_row(matmul(x[0], layer.weight), layer.bias);
  for (int k = 1; k <= x.order(); ++k) r[k] = matmul(x[k], layer.weight);
  return r;
}

}  // namespace detail

template <class T>
Jet<T> mlp_forward_batch(const MlpSpec& spec, const std::vector<DenseArrays<T>>& layers, const Jet<T>& x) {
  if (x[0].cols() != spec.in_dim) throw ShapeError("mlp_forward_batch: input width mismatch");
  if (spec.variant == MlpVariant::kStandard) {
    Jet<T> h = tanh(detail::dense_jet(layers[0], x));
    for (int k = 1; k < spec.depth; ++k) h = tanh(detail::dense_jet(layers[static_cast<std::size_t>(k)], h));
    return detail::dense_jet(layers.back(), h);
  }
  const Jet<T> u = tanh(detail::dense_jet(layers[0], x));
  const Jet<T> v = tanh(detail::dense_jet(layers[1], x));
  const Jet<T> diff = v - u;
  Jet<T> h = x;
  for (int k = 0; k < spec.depth; ++k) {
    const Jet<T> z = tanh(detail::dense_jet(layers[static_cast<std::size_t>(2 + k)], h));
    h = u + z * diff;
  }
  return detail::dense_jet(layers.back(), h);
}

}  // namespace pidon
