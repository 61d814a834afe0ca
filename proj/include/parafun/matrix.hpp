#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "parafun/errors.hpp"

namespace parafun {

/// Real dense matrix stored row-major.
///
/// The universal value type of the library: ODE states, flow operators,
/// residuals and basis blocks are all `DenseMatrix` values.  A column vector
/// is an n x 1 matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;

  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
      : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionError("DenseMatrix: " + std::to_string(data_.size()) +
                           " entries for a " + std::to_string(rows_) + "x" +
                           std::to_string(cols_) + " matrix");
    }
  }

  /// Builds a matrix from nested row lists, e.g. `{{1, 2}, {3, 4}}`.
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw DimensionError("DenseMatrix: ragged row list");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static DenseMatrix zeros(std::size_t rows, std::size_t cols) { return {rows, cols, 0.0}; }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static DenseMatrix diagonal(std::span<const double> d) {
    DenseMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  static DenseMatrix diagonal(std::initializer_list<double> d) {
    return diagonal(std::span<const double>(d.begin(), d.size()));
  }

  static DenseMatrix column(std::span<const double> v) {
    return {v.size(), 1, std::vector<double>(v.begin(), v.end())};
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> entries() noexcept { return data_; }
  std::span<const double> entries() const noexcept { return data_; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  bool same_shape(const DenseMatrix& o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  std::string shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

  DenseMatrix& operator+=(const DenseMatrix& o) {
    require_same_shape(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  DenseMatrix& operator-=(const DenseMatrix& o) {
    require_same_shape(o, "-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }

  DenseMatrix& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  /// this += alpha * x
  DenseMatrix& axpy(double alpha, const DenseMatrix& x) {
    require_same_shape(x, "axpy");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += alpha * x.data_[i];
    return *this;
  }

  DenseMatrix transpose() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  /// Exact (bitwise on values) equality.
  friend bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

  void require_same_shape(const DenseMatrix& o, const char* op) const {
    if (!same_shape(o)) {
      throw DimensionError(std::string(op) + ": shape " + shape_string() + " vs " +
                           o.shape_string());
    }
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
inline DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
inline DenseMatrix operator*(DenseMatrix a, double s) { return a *= s; }
inline DenseMatrix operator*(double s, DenseMatrix a) { return a *= s; }
inline DenseMatrix operator-(DenseMatrix a) { return a *= -1.0; }

/// out = a * b.  Zero entries of `a` are skipped, so banded or block-sparse
/// left factors (Laplacians, trig block operators) cost O(nnz(a) * cols(b)).
inline void multiply_into(DenseMatrix& out, const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("multiply: " + a.shape_string() + " * " + b.shape_string());
  }
  const std::size_t n = a.rows(), inner = a.cols(), m = b.cols();
  if (out.rows() != n || out.cols() != m) out = DenseMatrix(n, m);
  else std::fill(out.entries().begin(), out.entries().end(), 0.0);
  const double* bp = b.entries().data();
  double* cp = out.entries().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* __restrict crow = cp + i * m;
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* __restrict brow = bp + k * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += aik * brow[j];
    }
  }
}

inline DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix c;
  multiply_into(c, a, b);
  return c;
}

inline double frobenius_norm(const DenseMatrix& m) {
  double s = 0.0;
  for (double v : m.entries()) s += v * v;
  return std::sqrt(s);
}

inline double max_abs(const DenseMatrix& m) {
  double s = 0.0;
  for (double v : m.entries()) s = std::max(s, std::abs(v));
  return s;
}

/// Induced infinity norm: maximum absolute row sum.
inline double norm_inf(const DenseMatrix& m) {
  double best = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (double v : m.row(i)) s += std::abs(v);
    best = std::max(best, s);
  }
  return best;
}

/// Stacks `top` over `bottom`.
inline DenseMatrix vstack(const DenseMatrix& top, const DenseMatrix& bottom) {
  if (top.cols() != bottom.cols()) {
    throw DimensionError("vstack: " + top.shape_string() + " over " + bottom.shape_string());
  }
  DenseMatrix out(top.rows() + bottom.rows(), top.cols());
  std::copy(top.entries().begin(), top.entries().end(), out.entries().begin());
  std::copy(bottom.entries().begin(), bottom.entries().end(),
            out.entries().begin() + static_cast<std::ptrdiff_t>(top.size()));
  return out;
}

/// Rows [first, first + count) of `m`.
inline DenseMatrix row_block(const DenseMatrix& m, std::size_t first, std::size_t count) {
  if (first + count > m.rows()) throw DimensionError("row_block: out of range");
  DenseMatrix out(count, m.cols());
  for (std::size_t i = 0; i < count; ++i) {
    auto src = m.row(first + i);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

/// LU factorization with partial pivoting, P A = L U, stored in place.
class LuFactorization {
 public:
  explicit LuFactorization(DenseMatrix a) : lu_(std::move(a)), perm_(lu_.rows()) {
    if (!lu_.is_square()) throw DimensionError("LU: matrix " + lu_.shape_string() + " not square");
    const std::size_t n = lu_.rows();
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    double scale = max_abs(lu_);
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t piv = k;
      for (std::size_t i = k + 1; i < n; ++i)
        if (std::abs(lu_(i, k)) > std::abs(lu_(piv, k))) piv = i;
      const double pivot = lu_(piv, k);
      if (!(std::abs(pivot) > 1e-14 * scale) || !std::isfinite(pivot)) {
        throw NumericError("LU: matrix is singular to working precision (column " +
                           std::to_string(k) + ")");
      }
      if (piv != k) {
        std::swap_ranges(lu_.row(k).begin(), lu_.row(k).end(), lu_.row(piv).begin());
        std::swap(perm_[k], perm_[piv]);
      }
      auto rk = lu_.row(k);
      for (std::size_t i = k + 1; i < n; ++i) {
        auto ri = lu_.row(i);
        const double l = ri[k] / pivot;
        ri[k] = l;
        if (l == 0.0) continue;
        for (std::size_t j = k + 1; j < n; ++j) ri[j] -= l * rk[j];
      }
    }
  }

  std::size_t order() const noexcept { return lu_.rows(); }

  /// Solves A X = rhs for every column of rhs.
  DenseMatrix solve(const DenseMatrix& rhs) const {
    const std::size_t n = lu_.rows();
    if (rhs.rows() != n) throw DimensionError("LU solve: rhs " + rhs.shape_string());
    const std::size_t m = rhs.cols();
    DenseMatrix x(n, m);
    for (std::size_t i = 0; i < n; ++i) {
      auto src = rhs.row(perm_[i]);
      std::copy(src.begin(), src.end(), x.row(i).begin());
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto xi = x.row(i);
      for (std::size_t k = 0; k < i; ++k) {
        const double l = lu_(i, k);
        if (l == 0.0) continue;
        auto xk = x.row(k);
        for (std::size_t j = 0; j < m; ++j) xi[j] -= l * xk[j];
      }
    }
    for (std::size_t ii = n; ii-- > 0;) {
      auto xi = x.row(ii);
      for (std::size_t k = ii + 1; k < n; ++k) {
        const double u = lu_(ii, k);
        if (u == 0.0) continue;
        auto xk = x.row(k);
        for (std::size_t j = 0; j < m; ++j) xi[j] -= u * xk[j];
      }
      const double d = lu_(ii, ii);
      for (std::size_t j = 0; j < m; ++j) xi[j] /= d;
    }
    return x;
  }

 private:
  DenseMatrix lu_;
  std::vector<std::size_t> perm_;
};

/// Smallest non-negative m with 2^-m * ||a||_inf <= 1.
inline unsigned scaling_exponent(const DenseMatrix& a) {
  double norm = norm_inf(a);
  if (!std::isfinite(norm)) throw NumericError("scaling_exponent: non-finite norm");
  unsigned m = 0;
  while (norm > 1.0) {
    norm *= 0.5;
    ++m;
  }
  return m;
}

}  // namespace parafun
