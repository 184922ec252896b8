#pragma once

#include <string>
#include <vector>

#include "pidon/autodiff/elementwise.hpp"
#include "pidon/autodiff/tape.hpp"
#include "pidon/errors.hpp"

namespace pidon {

/// A column of independent scalars with elementwise arithmetic. Lets the
/// loss assembly written for batched arrays run over per-point scalar
/// evaluations (double or TapeVar) as well.
template <class S>
struct Pointwise {
  std::vector<S> v;

  Pointwise() = default;
  explicit Pointwise(std::vector<S> values) : v(std::move(values)) {}
  Pointwise(std::size_t n, const S& fill) : v(n, fill) {}

  std::size_t size() const { return v.size(); }
  const S& operator[](std::size_t i) const { return v[i]; }
  S& operator[](std::size_t i) { return v[i]; }

  Pointwise operator-() const {
    Pointwise r;
    r.v.reserve(v.size());
    for (const auto& e : v) r.v.push_back(-e);
    return r;
  }
};

namespace detail {

template <class S, class F>
Pointwise<S> zip(const Pointwise<S>& a, const Pointwise<S>& b, F f) {
  if (a.size() != b.size())
    throw ShapeError("pointwise size mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  Pointwise<S> r;
  r.v.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r.v.push_back(f(a.v[i], b.v[i]));
  return r;
}

template <class S, class F>
Pointwise<S> map(const Pointwise<S>& a, F f) {
  Pointwise<S> r;
  r.v.reserve(a.size());
  for (const auto& e : a.v) r.v.push_back(f(e));
  return r;
}

}  // namespace detail

template <class S>
Pointwise<S> operator+(const Pointwise<S>& a, const Pointwise<S>& b) {
  return detail::zip(a, b, [](const S& x, const S& y) { return S(x + y); });
}
template <class S>
Pointwise<S> operator-(const Pointwise<S>& a, const Pointwise<S>& b) {
  return detail::zip(a, b, [](const S& x, const S& y) { return S(x - y); });
}
template <class S>
Pointwise<S> operator*(const Pointwise<S>& a, const Pointwise<S>& b) {
  return detail::zip(a, b, [](const S& x, const S& y) { return S(x * y); });
}
template <class S>
Pointwise<S> operator/(const Pointwise<S>& a, const Pointwise<S>& b) {
  return detail::zip(a, b, [](const S& x, const S& y) { return S(x / y); });
}

template <class S>
Pointwise<S> operator+(const Pointwise<S>& a, double s) {
  return detail::map(a, [s](const S& x) { return S(x + s); });
}
template <class S>
Pointwise<S> operator+(double s, const Pointwise<S>& a) {
  return a + s;
}
template <class S>
Pointwise<S> operator-(const Pointwise<S>& a, double s) {
  return detail::map(a, [s](const S& x) { return S(x - s); });
}
template <class S>
Pointwise<S> operator-(double s, const Pointwise<S>& a) {
  return detail::map(a, [s](const S& x) { return S(s - x); });
}
template <class S>
Pointwise<S> operator*(const Pointwise<S>& a, double s) {
  return detail::map(a, [s](const S& x) { return S(x * s); });
}
template <class S>
Pointwise<S> operator*(double s, const Pointwise<S>& a) {
  return a * s;
}
template <class S>
Pointwise<S> operator/(const Pointwise<S>& a, double s) {
  return detail::map(a, [s](const S& x) { return S(x / s); });
}

template <class S>
Pointwise<S> tanh(const Pointwise<S>& a) {
  return detail::map(a, [](const S& x) { return S(tanh(x)); });
}
template <class S>
Pointwise<S> sin(const Pointwise<S>& a) {
  return detail::map(a, [](const S& x) { return S(sin(x)); });
}
template <class S>
Pointwise<S> cos(const Pointwise<S>& a) {
  return detail::map(a, [](const S& x) { return S(cos(x)); });
}
template <class S>
Pointwise<S> exp(const Pointwise<S>& a) {
  return detail::map(a, [](const S& x) { return S(exp(x)); });
}
template <class S>
Pointwise<S> square(const Pointwise<S>& a) {
  return detail::map(a, [](const S& x) { return S(square(x)); });
}

template <class S>
Pointwise<S> one_like(const Pointwise<S>& a) {
  return Pointwise<S>(a.size(), S(1.0));
}
template <class S>
Pointwise<S> zero_like(const Pointwise<S>& a) {
  return Pointwise<S>(a.size(), S(0.0));
}
template <class S>
bool any_zero(const Pointwise<S>& a) {
  for (const auto& e : a.v)
    if (any_zero(e)) return true;
  return false;
}

/// Mean of the column, as a scalar of the element type.
template <class S>
S mean(const Pointwise<S>& a) {
  if (a.v.empty()) throw ShapeError("mean of an empty column");
  S acc = a.v[0];
  for (std::size_t i = 1; i < a.v.size(); ++i) acc = acc + a.v[i];
  return acc * (1.0 / static_cast<double>(a.v.size()));
}

}  // namespace pidon
