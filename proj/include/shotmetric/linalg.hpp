#pragma once

#include <Eigen/Dense>

#include <algorithm>

namespace shotmetric {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Frobenius inner product <a, b>_F, i.e. the sum of entries of the
/// elementwise product. Equals tr(a^T b).
inline double frobenius_inner(const Matrix& a, const Matrix& b) {
  return a.cwiseProduct(b).sum();
}

/// ||a - b||_F / max(||a||_F, ||b||_F, 1e-30).
inline double relative_error(const Matrix& a, const Matrix& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-30});
  return (a - b).norm() / scale;
}

inline double relative_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-30});
  return std::abs(a - b) / scale;
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace shotmetric
