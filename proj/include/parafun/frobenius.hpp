#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "parafun/errors.hpp"
#include "parafun/matrix.hpp"

namespace parafun {

/// <a, b>_F = tr(b^T a) = sum_ij a_ij b_ij
inline double frobenius_inner(const DenseMatrix& a, const DenseMatrix& b) {
  a.require_same_shape(b, "frobenius_inner");
  const auto x = a.entries();
  const auto y = b.entries();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

/// Ordered list of equally shaped n x s blocks [Z_1, ..., Z_k].
class BlockFamily {
 public:
  BlockFamily() = default;
  BlockFamily(std::size_t block_rows, std::size_t block_cols)
      : rows_(block_rows), cols_(block_cols), shaped_(true) {}

  explicit BlockFamily(std::vector<DenseMatrix> blocks) {
    for (auto& b : blocks) push_back(std::move(b));
  }

  BlockFamily(std::initializer_list<DenseMatrix> blocks) {
    for (const auto& b : blocks) push_back(b);
  }

  void push_back(DenseMatrix block) {
    if (!shaped_) {
      rows_ = block.rows();
      cols_ = block.cols();
      shaped_ = true;
    } else if (block.rows() != rows_ || block.cols() != cols_) {
      throw DimensionError("BlockFamily: block " + block.shape_string() + " in a family of " +
                           std::to_string(rows_) + "x" + std::to_string(cols_) + " blocks");
    }
    blocks_.push_back(std::move(block));
  }

  std::size_t size() const noexcept { return blocks_.size(); }
  bool empty() const noexcept { return blocks_.empty(); }
  std::size_t block_rows() const noexcept { return rows_; }
  std::size_t block_cols() const noexcept { return cols_; }
  /// True once the block shape is fixed (by construction or first block).
  bool has_shape() const noexcept { return shaped_; }

  const DenseMatrix& operator[](std::size_t i) const { return blocks_[i]; }
  auto begin() const { return blocks_.begin(); }
  auto end() const { return blocks_.end(); }
  const std::vector<DenseMatrix>& blocks() const noexcept { return blocks_; }

  bool accepts(const DenseMatrix& m) const noexcept {
    return !shaped_ || (m.rows() == rows_ && m.cols() == cols_);
  }

 private:
  std::vector<DenseMatrix> blocks_;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  bool shaped_ = false;
};

/// p x l matrix of pairwise Frobenius inner products, entry (i, j) = <A_i, B_j>_F.
inline DenseMatrix diamond_product(const BlockFamily& a, const BlockFamily& b) {
  if (a.has_shape() && b.has_shape() &&
      (a.block_rows() != b.block_rows() || a.block_cols() != b.block_cols())) {
    throw DimensionError("diamond_product: block shapes differ");
  }
  DenseMatrix g(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) g(i, j) = frobenius_inner(a[i], b[j]);
  return g;
}

/// Relative threshold under which a Gram-Schmidt residual counts as zero.
inline constexpr double kRankTolerance = 1e-12;

/// F-orthonormal basis grown one block at a time by modified Gram-Schmidt
/// over the Frobenius inner product.
///
/// Each candidate is swept against the current basis; the sweep is repeated
/// while a pass removes more than half of the remaining norm (at most three
/// passes), which keeps the basis orthonormal to round-off even when the
/// candidates are nearly dependent, as successive parareal iterates are.
class FrobeniusBasis {
 public:
  FrobeniusBasis() = default;
  FrobeniusBasis(std::size_t block_rows, std::size_t block_cols) : q_(block_rows, block_cols) {}

  struct Append {
    std::vector<double> coeffs;  ///< r_ji against the basis before the append
    double residual_norm;        ///< r_ii
    bool kept;
  };

  /// Orthogonalizes `z` against the basis and appends the normalized
  /// residual unless r_ii <= kRankTolerance * max(1, ||z||_F).
  Append append(const DenseMatrix& z) {
    if (!q_.accepts(z)) throw DimensionError("FrobeniusBasis: block " + z.shape_string());
    Append out{std::vector<double>(q_.size(), 0.0), 0.0, false};
    DenseMatrix w = z;
    const double znorm = frobenius_norm(z);
    double prev = znorm;
    for (int pass = 0; pass < 3 && !q_.empty(); ++pass) {
      for (std::size_t j = 0; j < q_.size(); ++j) {
        const double r = frobenius_inner(w, q_[j]);
        out.coeffs[j] += r;
        w.axpy(-r, q_[j]);
      }
      const double now = frobenius_norm(w);
      if (now > 0.5 * prev) break;
      prev = now;
    }
    out.residual_norm = frobenius_norm(w);
    if (out.residual_norm > kRankTolerance * std::max(1.0, znorm)) {
      w *= 1.0 / out.residual_norm;
      q_.push_back(std::move(w));
      out.kept = true;
    }
    return out;
  }

  const BlockFamily& blocks() const noexcept { return q_; }
  std::size_t size() const noexcept { return q_.size(); }
  bool empty() const noexcept { return q_.empty(); }
  const DenseMatrix& operator[](std::size_t i) const { return q_[i]; }

 private:
  BlockFamily q_;
};

struct GlobalQRResult {
  BlockFamily q;                  ///< kept, F-orthonormal blocks
  DenseMatrix r;                  ///< l x l upper triangular over kept blocks
  DenseMatrix r_full;             ///< k x k with zero diagonal at eliminated blocks
  std::vector<std::size_t> kept;  ///< indices into the input family
};

/// Global QR factorization Z = Q (R (x) I_s) by Frobenius Gram-Schmidt.
///
/// Blocks whose residual norm falls below the rank tolerance are eliminated
/// from `q`, and their row and column are dropped from `r`; `r_full` keeps
/// the un-eliminated k x k triangle so every input block, kept or not, is
/// Z_i = sum_j r_full(j, i) Q_j over the kept columns j.
inline GlobalQRResult global_qr(const BlockFamily& z) {
  if (z.empty()) throw InvalidArgument("global_qr: empty block family");
  FrobeniusBasis basis(z.block_rows(), z.block_cols());
  const std::size_t k = z.size();
  GlobalQRResult out;
  out.r_full = DenseMatrix(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto step = basis.append(z[i]);
    for (std::size_t j = 0; j < step.coeffs.size(); ++j) out.r_full(out.kept[j], i) = step.coeffs[j];
    if (step.kept) {
      out.r_full(i, i) = step.residual_norm;
      out.kept.push_back(i);
    }
  }
  const std::size_t l = out.kept.size();
  out.r = DenseMatrix(l, l);
  for (std::size_t a = 0; a < l; ++a)
    for (std::size_t b = 0; b < l; ++b) out.r(a, b) = out.r_full(out.kept[a], out.kept[b]);
  out.q = basis.blocks();
  return out;
}

struct Projection {
  std::vector<double> coeffs;  ///< Q^T <> Y
  DenseMatrix projection;      ///< sum_i coeffs_i Q_i
};

/// Orthogonal projection of `y` onto span(q); `q` must be F-orthonormal.
inline Projection project(const BlockFamily& q, const DenseMatrix& y) {
  if (!q.accepts(y)) throw DimensionError("project: block " + y.shape_string());
  Projection out{std::vector<double>(q.size()), DenseMatrix(y.rows(), y.cols())};
  for (std::size_t i = 0; i < q.size(); ++i) {
    out.coeffs[i] = frobenius_inner(q[i], y);
    out.projection.axpy(out.coeffs[i], q[i]);
  }
  return out;
}

}  // namespace parafun
