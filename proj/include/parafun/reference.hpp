#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "parafun/errors.hpp"
#include "parafun/flows.hpp"
#include "parafun/frobenius.hpp"
#include "parafun/matrix.hpp"

// Independent oracles and problem generators.  The oracles use a different
// algorithm family (LU, Taylor series with scaling) from the ODE-flow
// methods they check.

namespace parafun {

enum class ProblemFamily { laplacian_1d, laplacian_2d, spd_random_shifted };

struct Scaling {
  enum class Kind { none, frobenius, pow2, mesh };
  Kind kind = Kind::none;
  unsigned pow2 = 0;  ///< divide by 2^pow2 when kind == pow2

  static Scaling none() { return {}; }
  static Scaling frobenius() { return {Kind::frobenius, 0}; }
  static Scaling power_of_two(unsigned m) { return {Kind::pow2, m}; }
  /// Finite-difference scaling 1/h^2 with h = 1/(n + 1).
  static Scaling mesh() { return {Kind::mesh, 0}; }
};

struct ProblemSpec {
  ProblemFamily family = ProblemFamily::laplacian_1d;
  std::size_t n = 2;  ///< matrix order (points per direction for laplacian_2d)
  Scaling scaling{};
  std::uint64_t seed = 42;  ///< spd_random_shifted only
};

namespace detail {

inline DenseMatrix random_orthogonal(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  FrobeniusBasis cols(n, 1);
  while (cols.size() < n) {
    DenseMatrix v(n, 1);
    for (double& x : v.entries()) x = normal(rng);
    cols.append(v);
  }
  DenseMatrix q(n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) q(i, j) = cols[j](i, 0);
  return q;
}

}  // namespace detail

/// Deterministic test matrix for `spec`; scaling is applied last.
inline DenseMatrix generate(const ProblemSpec& spec) {
  if (spec.n < 2) throw InvalidArgument("generate: n must be >= 2");
  const std::size_t n = spec.n;
  DenseMatrix a;
  switch (spec.family) {
    case ProblemFamily::laplacian_1d:
      a = DenseMatrix(n, n);
      for (std::size_t i = 0; i < n; ++i) {
        a(i, i) = 2.0;
        if (i > 0) a(i, i - 1) = -1.0;
        if (i + 1 < n) a(i, i + 1) = -1.0;
      }
      break;
    case ProblemFamily::laplacian_2d: {
      a = DenseMatrix(n * n, n * n);
      for (std::size_t iy = 0; iy < n; ++iy)
        for (std::size_t ix = 0; ix < n; ++ix) {
          const std::size_t r = iy * n + ix;
          a(r, r) = 4.0;
          if (ix > 0) a(r, r - 1) = -1.0;
          if (ix + 1 < n) a(r, r + 1) = -1.0;
          if (iy > 0) a(r, r - n) = -1.0;
          if (iy + 1 < n) a(r, r + n) = -1.0;
        }
      break;
    }
    case ProblemFamily::spd_random_shifted: {
      const DenseMatrix q = detail::random_orthogonal(n, spec.seed);
      std::vector<double> d(n);
      for (std::size_t i = 0; i < n; ++i) d[i] = static_cast<double>(i + 1);
      a = q.transpose() * DenseMatrix::diagonal(d) * q;
      // exact symmetry
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) a(j, i) = a(i, j);
      break;
    }
  }
  switch (spec.scaling.kind) {
    case Scaling::Kind::none: break;
    case Scaling::Kind::frobenius: a *= 1.0 / frobenius_norm(a); break;
    case Scaling::Kind::pow2: a *= std::ldexp(1.0, -static_cast<int>(spec.scaling.pow2)); break;
    case Scaling::Kind::mesh: {
      const double inv_h = static_cast<double>(n + 1);
      a *= inv_h * inv_h;
      break;
    }
  }
  return a;
}

/// Dense LU inverse with partial pivoting.
inline DenseMatrix reference_inverse(const DenseMatrix& a) {
  if (!a.is_square()) throw DimensionError("reference_inverse: " + a.shape_string() + " not square");
  return LuFactorization(a).solve(DenseMatrix::identity(a.rows()));
}

namespace detail {

// exp(a) by its Taylor series, summed until ||term||_F < 1e-20.
inline DenseMatrix taylor_exp(const DenseMatrix& a) {
  const std::size_t n = a.rows();
  DenseMatrix sum = DenseMatrix::identity(n);
  DenseMatrix term = DenseMatrix::identity(n);
  for (int k = 1; k < 200; ++k) {
    term = term * a;
    term *= 1.0 / k;
    sum += term;
    if (frobenius_norm(term) < 1e-20) break;
  }
  return sum;
}

// cos(a) and sin(a) by their Taylor series.
inline std::pair<DenseMatrix, DenseMatrix> taylor_cos_sin(const DenseMatrix& a) {
  const std::size_t n = a.rows();
  const DenseMatrix a2 = a * a;
  DenseMatrix c = DenseMatrix::identity(n), s = a;
  DenseMatrix ct = DenseMatrix::identity(n), st = a;
  for (int k = 1; k < 100; ++k) {
    ct = ct * a2;
    ct *= -1.0 / ((2.0 * k - 1.0) * (2.0 * k));
    st = st * a2;
    st *= -1.0 / ((2.0 * k) * (2.0 * k + 1.0));
    c += ct;
    s += st;
    if (frobenius_norm(ct) < 1e-20 && frobenius_norm(st) < 1e-20) break;
  }
  return {std::move(c), std::move(s)};
}

inline void require_square(const DenseMatrix& a, const char* who) {
  if (!a.is_square() || a.empty()) throw DimensionError(std::string(who) + ": " + a.shape_string() + " not square");
}

}  // namespace detail

/// exp(a) by scaling, Taylor series and repeated squaring.
inline DenseMatrix reference_exp(const DenseMatrix& a) {
  detail::require_square(a, "reference_exp");
  const unsigned m = scaling_exponent(a);
  DenseMatrix e = detail::taylor_exp(a * std::ldexp(1.0, -static_cast<int>(m)));
  for (unsigned i = 0; i < m; ++i) e = e * e;
  return e;
}

/// (cos(a), sin(a)) by scaling, Taylor series and double-angle recovery
/// cos(2M) = 2 cos^2(M) - I, sin(2M) = 2 sin(M) cos(M).
inline std::pair<DenseMatrix, DenseMatrix> reference_cos_sin(const DenseMatrix& a) {
  detail::require_square(a, "reference_cos_sin");
  const unsigned m = scaling_exponent(a);
  auto [c, s] = detail::taylor_cos_sin(a * std::ldexp(1.0, -static_cast<int>(m)));
  const DenseMatrix id = DenseMatrix::identity(a.rows());
  for (unsigned i = 0; i < m; ++i) {
    DenseMatrix s2 = s * c * 2.0;
    DenseMatrix c2 = c * c * 2.0 - id;
    s = std::move(s2);
    c = std::move(c2);
  }
  return {std::move(c), std::move(s)};
}

inline DenseMatrix reference_cos(const DenseMatrix& a) { return reference_cos_sin(a).first; }
inline DenseMatrix reference_sin(const DenseMatrix& a) { return reference_cos_sin(a).second; }

struct ApproxInverseMethod {
  enum class Kind { ilu0_solve, threshold };
  Kind kind = Kind::ilu0_solve;
  double level = 0.01;  ///< relative threshold for Kind::threshold

  static ApproxInverseMethod ilu0() { return {Kind::ilu0_solve, 0.0}; }
  static ApproxInverseMethod threshold(double p) { return {Kind::threshold, p}; }
};

/// Incomplete LU factorization with the sparsity pattern of `a` (no fill).
class Ilu0 {
 public:
  explicit Ilu0(const DenseMatrix& a) : lu_(a) {
    if (!a.is_square()) throw DimensionError("ILU(0): " + a.shape_string() + " not square");
    const std::size_t n = a.rows();
    for (std::size_t i = 1; i < n; ++i) {
      for (std::size_t k = 0; k < i; ++k) {
        if (a(i, k) == 0.0) continue;
        const double pivot = lu_(k, k);
        if (pivot == 0.0) throw NumericError("ILU(0): zero pivot at row " + std::to_string(k));
        lu_(i, k) /= pivot;
        const double l = lu_(i, k);
        for (std::size_t j = k + 1; j < n; ++j)
          if (a(i, j) != 0.0) lu_(i, j) -= l * lu_(k, j);
      }
      if (lu_(i, i) == 0.0) throw NumericError("ILU(0): zero pivot at row " + std::to_string(i));
    }
    if (n > 0 && lu_(0, 0) == 0.0) throw NumericError("ILU(0): zero pivot at row 0");
  }

  /// Solves L U x = rhs.
  DenseMatrix solve(const DenseMatrix& rhs) const {
    const std::size_t n = lu_.rows(), m = rhs.cols();
    if (rhs.rows() != n) throw DimensionError("ILU(0) solve: rhs " + rhs.shape_string());
    DenseMatrix x = rhs;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < i; ++k) {
        const double l = lu_(i, k);
        if (l == 0.0) continue;
        for (std::size_t j = 0; j < m; ++j) x(i, j) -= l * x(k, j);
      }
    for (std::size_t i = n; i-- > 0;) {
      for (std::size_t k = i + 1; k < n; ++k) {
        const double u = lu_(i, k);
        if (u == 0.0) continue;
        for (std::size_t j = 0; j < m; ++j) x(i, j) -= u * x(k, j);
      }
      for (std::size_t j = 0; j < m; ++j) x(i, j) /= lu_(i, i);
    }
    return x;
  }

 private:
  DenseMatrix lu_;
};

/// Approximate solution X of A X = rhs from a cheap approximate inverse:
/// ILU(0) solves, or the exact inverse with entries below level * max|entry|
/// zeroed (applied to rhs).
inline DenseMatrix approx_inverse(const DenseMatrix& a, ApproxInverseMethod method, const DenseMatrix& rhs) {
  detail::require_square(a, "approx_inverse");
  if (method.kind == ApproxInverseMethod::Kind::ilu0_solve) return Ilu0(a).solve(rhs);
  DenseMatrix inv = reference_inverse(a);
  const double cut = method.level * max_abs(inv);
  for (double& v : inv.entries())
    if (std::abs(v) < cut) v = 0.0;
  if (rhs.rows() == rhs.cols() && rhs == DenseMatrix::identity(rhs.rows())) return inv;
  return inv * rhs;
}

inline DenseMatrix approx_inverse(const DenseMatrix& a, ApproxInverseMethod method) {
  return approx_inverse(a, method, DenseMatrix::identity(a.rows()));
}

/// Sequential fine solution at every coarse node: one sweep over all N * J
/// fine steps, interval by interval.
inline std::vector<DenseMatrix> sequential_fine(const Propagator& fine, const TimeGrid& grid, const DenseMatrix& u0) {
  grid.validate();
  std::vector<DenseMatrix> u;
  u.reserve(grid.n_coarse + 1);
  u.push_back(u0);
  for (std::size_t n = 0; n < grid.n_coarse; ++n) {
    try {
      u.push_back(fine.propagate(grid.time(n), grid.time(n + 1), u[n]));
    } catch (const IntervalError&) {
      throw;
    } catch (const NumericError& e) {
      throw IntervalError(n, e.what());
    }
    if (!u.back().all_finite()) throw IntervalError(n, "non-finite state");
  }
  return u;
}

inline std::vector<DenseMatrix> sequential_fine(const FlowSpec& flow, const TimeGrid& grid, Scheme scheme,
                                                const DenseMatrix& u0) {
  const Propagator fine(flow, scheme, grid.n_fine_per_interval, grid.coarse_step());
  return sequential_fine(fine, grid, u0);
}

}  // namespace parafun
