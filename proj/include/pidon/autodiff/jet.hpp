#pragma once

#include <array>
#include <concepts>
#include <string>
#include <utility>

#include "pidon/autodiff/elementwise.hpp"
#include "pidon/errors.hpp"

namespace pidon {

/// Truncated Taylor scalar carrying f and the pure derivatives f', f'', f'''
/// with respect to one seeded input coordinate.
///
/// The coefficient type T is generic: double for plain evaluation, TapeVar for
/// parameter gradients of input derivatives, and the array types for batched
/// evaluation. Coefficients are derivatives, not Taylor coefficients, so the
/// product rule carries binomial factors.
template <class T>
class Jet {
 public:
  static constexpr int kMaxOrder = 3;

  Jet() = default;

  /// Jet of the given order with every coefficient left default-constructed.
  explicit Jet(int order) : order_(checked(order)) {}

  /// Independent variable: [value, 1, 0, 0] truncated to order + 1.
  static Jet seed(const T& value, int order) {
    Jet j(order);
    j.c_[0] = value;
    for (int k = 1; k <= order; ++k) j.c_[k] = k == 1 ? one_like(value) : zero_like(value);
    return j;
  }

  /// Quantity independent of the seeded coordinate: [value, 0, 0, 0].
  static Jet constant(const T& value, int order) {
    Jet j(order);
    j.c_[0] = value;
    for (int k = 1; k <= order; ++k) j.c_[k] = zero_like(value);
    return j;
  }

  int order() const { return order_; }
  const T& value() const { return c_[0]; }
  const T& operator[](int k) const { return c_[k]; }
  T& operator[](int k) { return c_[k]; }

  Jet operator-() const {
    Jet r(order_);
    for (int k = 0; k <= order_; ++k) r.c_[k] = -c_[k];
    return r;
  }

  Jet& operator+=(const Jet& b) { return *this = *this + b; }
  Jet& operator-=(const Jet& b) { return *this = *this - b; }
  Jet& operator*=(const Jet& b) { return *this = *this * b; }

  static int checked(int order) {
    if (order < 0 || order > kMaxOrder)
      throw RangeError("jet order " + std::to_string(order) + " outside [0, 3]");
    return order;
  }

 private:
  std::array<T, kMaxOrder + 1> c_{};
  int order_ = 0;
};

template <class T>
Jet<T> jet_seed(const T& value, int order) {
  return Jet<T>::seed(value, order);
}

namespace detail {

template <class T>
int common_order(const Jet<T>& a, const Jet<T>& b) {
  if (a.order() != b.order())
    throw ShapeError("jet order mismatch: " + std::to_string(a.order()) + " vs " +
                     std::to_string(b.order()));
  return a.order();
}

// g = f(a) given f and its first three derivatives evaluated at a[0].
template <class T>
Jet<T> chain(const Jet<T>& a, T f0, const T& d1, const T& d2, const T& d3) {
  const int n = a.order();
  Jet<T> r(n);
  r[0] = std::move(f0);
  if (n >= 1) r[1] = d1 * a[1];
  if (n >= 2) {
    T a1sq = a[1] * a[1];
    r[2] = d2 * a1sq + d1 * a[2];
    if (n >= 3) r[3] = d3 * (a1sq * a[1]) + 3.0 * (d2 * (a[1] * a[2])) + d1 * a[3];
  }
  return r;
}

}  // namespace detail

template <class T>
Jet<T> operator+(const Jet<T>& a, const Jet<T>& b) {
  const int n = detail::common_order(a, b);
  Jet<T> r(n);
  for (int k = 0; k <= n; ++k) r[k] = a[k] + b[k];
  return r;
}

template <class T>
Jet<T> operator-(const Jet<T>& a, const Jet<T>& b) {
  const int n = detail::common_order(a, b);
  Jet<T> r(n);
  for (int k = 0; k <= n; ++k) r[k] = a[k] - b[k];
  return r;
}

template <class T>
Jet<T> operator*(const Jet<T>& a, const Jet<T>& b) {
  const int n = detail::common_order(a, b);
  Jet<T> r(n);
  r[0] = a[0] * b[0];
  if (n >= 1) r[1] = a[0] * b[1] + a[1] * b[0];
  if (n >= 2) r[2] = a[0] * b[2] + 2.0 * (a[1] * b[1]) + a[2] * b[0];
  if (n >= 3) r[3] = a[0] * b[3] + 3.0 * (a[1] * b[2]) + 3.0 * (a[2] * b[1]) + a[3] * b[0];
  return r;
}

template <class T>
Jet<T> operator/(const Jet<T>& a, const Jet<T>& b) {
  const int n = detail::common_order(a, b);
  if (any_zero(b[0])) throw SingularityError("jet division by zero leading coefficient");
  Jet<T> r(n);
  r[0] = a[0] / b[0];
  if (n >= 1) r[1] = (a[1] - r[0] * b[1]) / b[0];
  if (n >= 2) r[2] = (a[2] - 2.0 * (r[1] * b[1]) - r[0] * b[2]) / b[0];
  if (n >= 3)
    r[3] = (a[3] - 3.0 * (r[2] * b[1]) - 3.0 * (r[1] * b[2]) - r[0] * b[3]) / b[0];
  return r;
}

// Mixed operations with a quantity that does not depend on the seed.

template <class T>
Jet<T> operator+(Jet<T> a, const T& s) {
  a[0] = a[0] + s;
  return a;
}
template <class T>
Jet<T> operator+(const T& s, Jet<T> a) {
  a[0] = s + a[0];
  return a;
}
template <class T>
Jet<T> operator-(Jet<T> a, const T& s) {
  a[0] = a[0] - s;
  return a;
}
template <class T>
Jet<T> operator-(const T& s, const Jet<T>& a) {
  Jet<T> r = -a;
  r[0] = s - a[0];
  return r;
}
template <class T>
Jet<T> operator*(Jet<T> a, const T& s) {
  for (int k = 0; k <= a.order(); ++k) a[k] = a[k] * s;
  return a;
}
template <class T>
Jet<T> operator*(const T& s, Jet<T> a) {
  for (int k = 0; k <= a.order(); ++k) a[k] = s * a[k];
  return a;
}

template <class T>
  requires(!std::same_as<T, double>)
Jet<T> operator+(Jet<T> a, double s) {
  a[0] = a[0] + s;
  return a;
}
template <class T>
  requires(!std::same_as<T, double>)
Jet<T> operator+(double s, Jet<T> a) {
  return std::move(a) + s;
}
template <class T>
  requires(!std::same_as<T, double>)
Jet<T> operator-(Jet<T> a, double s) {
  a[0] = a[0] - s;
  return a;
}
template <class T>
  requires(!std::same_as<T, double>)
Jet<T> operator-(double s, const Jet<T>& a) {
  Jet<T> r = -a;
  r[0] = s - a[0];
  return r;
}
template <class T>
  requires(!std::same_as<T, double>)
Jet<T> operator*(Jet<T> a, double s) {
  for (int k = 0; k <= a.order(); ++k) a[k] = a[k] * s;
  return a;
}
template <class T>
  requires(!std::same_as<T, double>)
Jet<T> operator*(double s, Jet<T> a) {
  for (int k = 0; k <= a.order(); ++k) a[k] = s * a[k];
  return a;
}

template <class T>
Jet<T> tanh(const Jet<T>& a) {
  T y = tanh(a[0]);
  if (a.order() == 0) return detail::chain(a, std::move(y), T{}, T{}, T{});
  T d1 = 1.0 - y * y;
  T d2 = a.order() >= 2 ? T(-2.0 * (y * d1)) : T{};
  T d3 = a.order() >= 3 ? T(d1 * (4.0 * (y * y) - 2.0 * d1)) : T{};
  return detail::chain(a, std::move(y), d1, d2, d3);
}

template <class T>
Jet<T> sin(const Jet<T>& a) {
  T s = sin(a[0]);
  if (a.order() == 0) return detail::chain(a, std::move(s), T{}, T{}, T{});
  T c = cos(a[0]);
  T ns = a.order() >= 2 ? T(-s) : T{};
  T nc = a.order() >= 3 ? T(-c) : T{};
  return detail::chain(a, std::move(s), c, ns, nc);
}

template <class T>
Jet<T> cos(const Jet<T>& a) {
  T c = cos(a[0]);
  if (a.order() == 0) return detail::chain(a, std::move(c), T{}, T{}, T{});
  T s = sin(a[0]);
  T ns = -s;
  T nc = a.order() >= 2 ? T(-c) : T{};
  return detail::chain(a, std::move(c), ns, nc, s);
}

template <class T>
Jet<T> exp(const Jet<T>& a) {
  T e = exp(a[0]);
  return detail::chain(a, e, e, e, e);
}

template <class T>
Jet<T> square(const Jet<T>& a) {
  return a * a;
}

}  // namespace pidon
