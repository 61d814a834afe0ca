#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "parafun/matrix.hpp"

namespace testsupport {

inline parafun::DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  parafun::DenseMatrix m(rows, cols);
  for (double& x : m.entries()) x = normal(rng);
  return m;
}

inline parafun::DenseMatrix random_spd(std::size_t n, std::mt19937_64& rng, double shift = 1.0) {
  const auto g = random_matrix(n, n, rng);
  parafun::DenseMatrix a = g * g.transpose() * (1.0 / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) a(i, i) += shift;
  return a;
}

// Plain triple loop, independent of multiply_into.
inline parafun::DenseMatrix naive_product(const parafun::DenseMatrix& a, const parafun::DenseMatrix& b) {
  parafun::DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

inline double max_diff(const parafun::DenseMatrix& a, const parafun::DenseMatrix& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) d = std::max(d, std::abs(a(i, j) - b(i, j)));
  return d;
}

inline parafun::DenseMatrix scalar(double v) { return parafun::DenseMatrix(1, 1, v); }

}  // namespace testsupport
