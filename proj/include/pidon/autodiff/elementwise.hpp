#pragma once

// Elementwise math for the plain value types (double and Eigen arrays). The
// differentiable types provide the same overload set next to their own
// definitions, so generic code can call tanh(x), sin(x), ... unqualified.

#include <Eigen/Dense>

#include <cmath>

namespace pidon {

using Array = Eigen::ArrayXXd;

inline double tanh(double x) { return std::tanh(x); }
inline double sin(double x) { return std::sin(x); }
inline double cos(double x) { return std::cos(x); }
inline double exp(double x) { return std::exp(x); }
inline double square(double x) { return x * x; }

// Eigen's double tanh is scalar; the exp form vectorizes and is exact to a
// few ulps in absolute terms.
inline Array tanh(const Array& a) { return 1.0 - 2.0 / ((2.0 * a).exp() + 1.0); }
inline Array sin(const Array& a) { return a.sin(); }
inline Array cos(const Array& a) { return a.cos(); }
inline Array exp(const Array& a) { return a.exp(); }
inline Array square(const Array& a) { return a.square(); }

inline double one_like(double) { return 1.0; }
inline double zero_like(double) { return 0.0; }
inline Array one_like(const Array& a) { return Array::Ones(a.rows(), a.cols()); }
inline Array zero_like(const Array& a) { return Array::Zero(a.rows(), a.cols()); }

inline bool any_zero(double x) { return x == 0.0; }
inline bool any_zero(const Array& a) { return (a == 0.0).any(); }

}  // namespace pidon
