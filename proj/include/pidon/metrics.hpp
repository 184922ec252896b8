#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>

#include "pidon/errors.hpp"

namespace pidon {

/// ||pred - ref||_2 / ||ref||_2 over the flattened values.
inline double rel_l2(std::span<const double> pred, std::span<const double> ref) {
  if (pred.size() != ref.size()) throw ShapeError("rel_l2: shapes differ");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double d = pred[i] - ref[i];
    num += d * d;
    den += ref[i] * ref[i];
  }
  if (!(den > 0.0)) throw UndefinedMetricError("rel_l2: reference has zero norm");
  return std::sqrt(num) / std::sqrt(den);
}

inline double rel_l2(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& ref) {
  if (pred.rows() != ref.rows() || pred.cols() != ref.cols()) throw ShapeError("rel_l2: shapes differ");
  const double den = ref.norm();
  if (!(den > 0.0)) throw UndefinedMetricError("rel_l2: reference has zero norm");
  return (pred - ref).norm() / den;
}

}  // namespace pidon
