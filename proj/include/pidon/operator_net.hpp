#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pidon/mlp.hpp"

namespace pidon {

/// Fixed locations at which input functions are sampled for the branch net.
struct SensorGrid {
  std::vector<double> points;

  static SensorGrid uniform(double lo, double hi, int m) {
    if (m < 1) throw ConfigError("sensor grid needs at least one point");
    SensorGrid g;
    g.points.resize(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i)
      g.points[static_cast<std::size_t>(i)] = m == 1 ? lo : lo + (hi - lo) * i / (m - 1);
    return g;
  }

  std::size_t size() const { return points.size(); }

  void validate() const {
    if (points.empty()) throw ConfigError("sensor grid is empty");
    if (!std::is_sorted(points.begin(), points.end())) throw ConfigError("sensor grid is not sorted");
  }
};

/// Architecture of a DeepONet: one or two branch nets whose latent features
/// are multiplied together, a trunk net over query coordinates, and a
/// partition 0 = q_0 < q_1 < ... < q_n = q of the latent index range into n
/// outputs. Output i is out_scale[i] * sum_{k in block i} (prod_b b_k) t_k.
struct OperatorNetSpec {
  std::vector<MlpSpec> branches;
  MlpSpec trunk;
  std::vector<int> partition;
  std::vector<double> out_scale;

  int latent() const { return trunk.out_dim; }
  int n_outputs() const { return static_cast<int>(partition.size()) - 1; }
  bool two_branch() const { return branches.size() == 2; }

  friend bool operator==(const OperatorNetSpec&, const OperatorNetSpec&) = default;
};

inline void validate(const OperatorNetSpec& s) {
  if (s.branches.empty() || s.branches.size() > 2) throw ConfigError("operator net needs one or two branch nets");
  validate(s.trunk);
  for (const auto& b : s.branches) {
    validate(b);
    if (b.out_dim != s.trunk.out_dim)
      throw ShapeError("branch latent width " + std::to_string(b.out_dim) + " differs from trunk width " +
                       std::to_string(s.trunk.out_dim));
  }
  if (s.partition.size() < 2 || s.partition.front() != 0 || s.partition.back() != s.latent())
    throw ShapeError("partition must start at 0 and end at the latent width " + std::to_string(s.latent()));
  for (std::size_t i = 1; i < s.partition.size(); ++i)
    if (s.partition[i] <= s.partition[i - 1]) throw ShapeError("partition must be strictly increasing");
  if (s.out_scale.size() != static_cast<std::size_t>(s.n_outputs()))
    throw ShapeError("out_scale needs one entry per output");
}

/// Equal split of q latent features into n outputs.
inline std::vector<int> equal_partition(int q, int n) {
  if (n < 1 || q < n) throw ConfigError("cannot split latent width " + std::to_string(q) + " into " + std::to_string(n));
  std::vector<int> p(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) p[static_cast<std::size_t>(i)] = (q * i) / n;
  return p;
}

/// Offsets of each sub-network inside the flat parameter vector: branches in
/// order, then the trunk.
struct OperatorLayout {
  std::vector<std::size_t> branch_offset;
  std::size_t trunk_offset = 0;
  std::size_t total = 0;
};

inline OperatorLayout operator_layout(const OperatorNetSpec& s) {
  OperatorLayout l;
  std::size_t off = 0;
  for (const auto& b : s.branches) {
    l.branch_offset.push_back(off);
    off += param_count(b);
  }
  l.trunk_offset = off;
  off += param_count(s.trunk);
  l.total = off;
  return l;
}

struct OperatorNet {
  OperatorNetSpec spec;
  std::vector<double> params;

  std::span<const double> branch_params(std::size_t i) const {
    const auto l = operator_layout(spec);
    return std::span<const double>(params).subspan(l.branch_offset.at(i), param_count(spec.branches[i]));
  }
  std::span<const double> trunk_params() const {
    const auto l = operator_layout(spec);
    return std::span<const double>(params).subspan(l.trunk_offset, param_count(spec.trunk));
  }
};

/// Glorot-initialized operator net; each sub-network draws from its own
/// stream derived from (seed, index).
inline OperatorNet init_operator_net(const OperatorNetSpec& spec, std::uint64_t seed) {
  validate(spec);
  OperatorNet net{spec, std::vector<double>(operator_layout(spec).total)};
  const auto l = operator_layout(spec);
  std::vector<std::pair<MlpSpec, std::size_t>> parts;
  for (std::size_t i = 0; i < spec.branches.size(); ++i) parts.emplace_back(spec.branches[i], l.branch_offset[i]);
  parts.emplace_back(spec.trunk, l.trunk_offset);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i), 0x6e657473u};
    std::mt19937_64 rng(seq);
    glorot_fill(parts[i].first,
                std::span<double>(net.params).subspan(parts[i].second, param_count(parts[i].first)), rng);
  }
  return net;
}

/// Merges latent features: out_i = scale_i * sum_{k in block i} (prod_b b_k) t_k.
/// Branch features are constants with respect to the query, so B may be a
/// plain scalar while Tr is a jet.
template <class B, class Tr>
std::vector<Tr> merge_latents(const std::vector<std::vector<B>>& branch, const std::vector<Tr>& trunk,
                              std::span<const int> partition, std::span<const double> out_scale) {
  const std::size_t q = trunk.size();
  for (const auto& b : branch)
    if (b.size() != q) throw ShapeError("merge_latents: branch and trunk widths differ");
  if (partition.empty() || static_cast<std::size_t>(partition.back()) != q)
    throw ShapeError("merge_latents: partition does not cover the latent width");
  std::vector<Tr> out;
  for (std::size_t i = 0; i + 1 < partition.size(); ++i) {
    std::optional<Tr> acc;
    for (int k = partition[i]; k < partition[i + 1]; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      B coef = branch[0][kk];
      for (std::size_t b = 1; b < branch.size(); ++b) coef = coef * branch[b][kk];
      Tr term = coef * trunk[kk];
      acc = acc ? Tr(*acc + term) : term;
    }
    out.push_back(*acc * out_scale[i]);
  }
  return out;
}

/// Branch features for one input sample. P is double or TapeVar.
template <class P>
std::vector<std::vector<P>> branch_features(const OperatorNetSpec& spec, std::span<const P> theta,
                                            std::span<const double> u, std::optional<double> u0) {
  if (spec.two_branch() && !u0) throw ArityError("two-branch operator net needs the scalar input u0");
  if (!spec.two_branch() && u0) throw ArityError("single-branch operator net takes no u0");
  if (u.size() != static_cast<std::size_t>(spec.branches[0].in_dim))
    throw ShapeError("branch input has " + std::to_string(u.size()) + " values, expected " +
                     std::to_string(spec.branches[0].in_dim));
  const auto l = operator_layout(spec);
  std::vector<std::vector<P>> feats;
  feats.push_back(mlp_forward<double, P>(spec.branches[0], theta.subspan(l.branch_offset[0], param_count(spec.branches[0])), u));
  if (spec.two_branch()) {
    const double in[1] = {*u0};
    feats.push_back(mlp_forward<double, P>(spec.branches[1], theta.subspan(l.branch_offset[1], param_count(spec.branches[1])),
                                           std::span<const double>(in, 1)));
  }
  return feats;
}

/// Pointwise DeepONet evaluation (reference route). S is the query scalar
/// (double, Jet<double>, TapeVar or Jet<TapeVar>); P the parameter scalar.
template <class S, class P>
std::vector<ProductType<S, P>> onet_eval_with(const OperatorNetSpec& spec, std::span<const P> theta,
                                              const std::vector<std::vector<P>>& branch, std::span<const S> query) {
  if (query.size() != static_cast<std::size_t>(spec.trunk.in_dim))
    throw ShapeError("query has " + std::to_string(query.size()) + " coordinates, expected " +
                     std::to_string(spec.trunk.in_dim));
  const auto l = operator_layout(spec);
  auto trunk = mlp_forward<S, P>(spec.trunk, theta.subspan(l.trunk_offset, param_count(spec.trunk)), query);
  return merge_latents(branch, trunk, spec.partition, spec.out_scale);
}

template <class S, class P>
std::vector<ProductType<S, P>> onet_eval(const OperatorNetSpec& spec, std::span<const P> theta,
                                         std::span<const double> u, std::optional<double> u0,
                                         std::span<const S> query) {
  const auto branch = branch_features<P>(spec, theta, u, u0);
  return onet_eval_with<S, P>(spec, theta, branch, query);
}

inline std::vector<double> onet_eval(const OperatorNet& net, std::span<const double> u, std::optional<double> u0,
                                     std::span<const double> query) {
  return onet_eval<double, double>(net.spec, std::span<const double>(net.params), u, u0, query);
}

// ---------------------------------------------------------------------------
// Batched evaluation. T is Array or ArrayVar.

template <class T>
struct OperatorArrays {
  std::vector<std::vector<DenseArrays<T>>> branches;
  std::vector<DenseArrays<T>> trunk;
};

inline OperatorArrays<Array> operator_arrays(const OperatorNet& net) {
  OperatorArrays<Array> a;
  for (std::size_t i = 0; i < net.spec.branches.size(); ++i)
    a.branches.push_back(dense_arrays(net.spec.branches[i], net.branch_params(i)));
  a.trunk = dense_arrays(net.spec.trunk, net.trunk_params());
  return a;
}

/// Branch features for a batch: inputs (B x m) and optional second inputs
/// (B x 1). Returns the B x q elementwise product of all branch outputs.
template <class T>
T batch_branch_features(const OperatorNetSpec& spec, const OperatorArrays<T>& arrays, const T& u,
                        const T* u0) {
  if (spec.two_branch() != (u0 != nullptr))
    throw ArityError(spec.two_branch() ? "two-branch operator net needs u0" : "single-branch operator net takes no u0");
  T feats = mlp_forward_batch(spec.branches[0], arrays.branches[0], Jet<T>::constant(u, 0))[0];
  if (u0) feats = feats * mlp_forward_batch(spec.branches[1], arrays.branches[1], Jet<T>::constant(*u0, 0))[0];
  return feats;
}

/// Outputs at n query points (rows of `query`); sample_index[r] selects the
/// branch-feature row for query row r. Returns one n x 1 jet per output.
template <class T>
std::vector<Jet<T>> batch_onet_outputs(const OperatorNetSpec& spec, const OperatorArrays<T>& arrays,
                                       const T& branch_feats, const std::vector<int>& sample_index,
                                       const Jet<T>& query) {
  const Jet<T> trunk = mlp_forward_batch(spec.trunk, arrays.trunk, query);
  const T b = gather_rows(branch_feats, sample_index);
  const Jet<T> prod = trunk * b;
  std::vector<Jet<T>> out;
  for (int i = 0; i < spec.n_outputs(); ++i) {
    Jet<T> o(prod.order());
    const auto s = spec.out_scale[static_cast<std::size_t>(i)];
    for (int k = 0; k <= prod.order(); ++k) {
      T block = col_block_sum(prod[k], spec.partition[static_cast<std::size_t>(i)],
                              spec.partition[static_cast<std::size_t>(i) + 1]);
      o[k] = s == 1.0 ? block : T(block * s);
    }
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace pidon
