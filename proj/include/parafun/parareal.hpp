#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "parafun/errors.hpp"
#include "parafun/flows.hpp"
#include "parafun/frobenius.hpp"
#include "parafun/matrix.hpp"
#include "parafun/parallel.hpp"

namespace parafun {

struct PararealOptions {
  std::size_t k_max = 25;
  /// Stop once max_n ||U^{k+1}_n - U^k_n||_F <= stop_tol * max(1, ||U0||_F).
  double stop_tol = 1e-12;
  /// 0 = all hardware threads.  Results do not depend on this value.
  std::size_t workers = 0;
  /// Optional sequential fine trajectory (N + 1 states) used to fill
  /// PararealRun::errors_vs_fine.
  const std::vector<DenseMatrix>* fine_reference = nullptr;
};

/// Iterate history U^k_n of a parareal solve.
struct PararealRun {
  TimeGrid grid;
  /// iterates[k][n], k = 0..K, n = 0..N.
  std::vector<std::vector<DenseMatrix>> iterates;
  /// Relative L-infinity(0, T) error against the fine reference, per k.
  std::vector<double> errors_vs_fine;
  /// max_n ||U^k_n - U^{k-1}_n||_F for k >= 1 (entry 0 is 0).
  std::vector<double> increments;
  /// Subspace dimension after enhancement at each iteration (modified only).
  std::vector<std::size_t> subspace_dims;
  bool converged = false;

  std::size_t iterations() const noexcept { return iterates.empty() ? 0 : iterates.size() - 1; }
  const DenseMatrix& final_state() const { return iterates.back().back(); }
};

/// max_n max_ij |x_n - ref_n| / max_n max_ij |ref_n|.
inline double trajectory_error(const std::vector<DenseMatrix>& x, const std::vector<DenseMatrix>& ref) {
  if (x.size() != ref.size()) throw DimensionError("trajectory_error: trajectory lengths differ");
  double num = 0.0, den = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    num = std::max(num, max_abs(x[n] - ref[n]));
    den = std::max(den, max_abs(ref[n]));
  }
  if (den == 0.0) return num;
  return num / den;
}

namespace detail {

inline void check_finite(const DenseMatrix& m, std::size_t interval) {
  if (!m.all_finite()) throw IntervalError(interval, "non-finite state");
}

inline void check_pair(const Propagator& f, const Propagator& g, const TimeGrid& grid, const DenseMatrix& u0) {
  grid.validate();
  if (&f.flow() != &g.flow() && f.flow().kind() != g.flow().kind()) {
    throw InvalidArgument("parareal: fine and coarse propagators integrate different flows");
  }
  f.flow().check_state(u0);
}

inline double increment(const std::vector<DenseMatrix>& a, const std::vector<DenseMatrix>& b) {
  double d = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) d = std::max(d, frobenius_norm(a[n] - b[n]));
  return d;
}

inline void record(PararealRun& run, const PararealOptions& opt, std::vector<DenseMatrix> level) {
  if (opt.fine_reference) run.errors_vs_fine.push_back(trajectory_error(level, *opt.fine_reference));
  run.increments.push_back(run.iterates.empty() ? 0.0 : increment(level, run.iterates.back()));
  run.iterates.push_back(std::move(level));
}

}  // namespace detail

/// U^0_{n+1} = G(T_{n+1}, T_n, U^0_n), U^0_0 = u0.
inline std::vector<DenseMatrix> coarse_sweep(const Propagator& g, const TimeGrid& grid, const DenseMatrix& u0) {
  grid.validate();
  std::vector<DenseMatrix> u;
  u.reserve(grid.n_coarse + 1);
  u.push_back(u0);
  for (std::size_t n = 0; n < grid.n_coarse; ++n) {
    try {
      u.push_back(g.propagate(grid.time(n), grid.time(n + 1), u[n]));
    } catch (const IntervalError&) {
      throw;
    } catch (const NumericError& e) {
      throw IntervalError(n, e.what());
    }
    detail::check_finite(u.back(), n);
  }
  return u;
}

/// Classical parareal:
///   U^{k+1}_{n+1} = G(U^{k+1}_n) + F(U^k_n) - G(U^k_n),
/// with the N fine solves of each iteration evaluated concurrently.
///
/// After k iterations U^k_n equals the sequential fine solution for n <= k,
/// so the iteration also stops at k = N.
inline PararealRun classical_parareal(const Propagator& f, const Propagator& g, const TimeGrid& grid,
                                      const DenseMatrix& u0, const PararealOptions& opt = {}) {
  detail::check_pair(f, g, grid, u0);
  if (opt.k_max < 1) throw InvalidArgument("classical_parareal: k_max must be >= 1");
  const std::size_t N = grid.n_coarse;
  const double tol = opt.stop_tol * std::max(1.0, frobenius_norm(u0));

  PararealRun run;
  run.grid = grid;
  auto level = coarse_sweep(g, grid, u0);
  // G(U^k_n) from the sweep that produced level k
  std::vector<DenseMatrix> g_prev(level.begin() + 1, level.end());
  detail::record(run, opt, std::move(level));

  std::vector<DenseMatrix> fine(N);
  for (std::size_t k = 0; k < opt.k_max; ++k) {
    const auto& cur = run.iterates.back();
    parallel_for(N, opt.workers, [&](std::size_t n) {
      fine[n] = f.propagate(grid.time(n), grid.time(n + 1), cur[n]);
      detail::check_finite(fine[n], n);
    });
    std::vector<DenseMatrix> next;
    next.reserve(N + 1);
    next.push_back(u0);
    std::vector<DenseMatrix> g_next(N);
    for (std::size_t n = 0; n < N; ++n) {
      g_next[n] = g.propagate(grid.time(n), grid.time(n + 1), next[n]);
      // F + (G_new - G_old): exactly F once the level has stopped moving
      DenseMatrix u = g_next[n] - g_prev[n];
      u += fine[n];
      detail::check_finite(u, n);
      next.push_back(std::move(u));
    }
    g_prev = std::move(g_next);
    detail::record(run, opt, std::move(next));
    if (run.increments.back() <= tol || k + 1 >= N) {
      run.converged = true;
      break;
    }
  }
  return run;
}

namespace detail {

// Algorithms for linear flows: the subspace S^k spans every iterate seen so
// far; the fine propagator is applied only to new basis directions and the
// projected part of each update is recombined from the stored images.
inline PararealRun modified_parareal(const Propagator& f, const Propagator& g, const TimeGrid& grid,
                                     const DenseMatrix& u0, const PararealOptions& opt, bool affine) {
  check_pair(f, g, grid, u0);
  if (opt.k_max < 1) throw InvalidArgument("modified_parareal: k_max must be >= 1");
  if (!f.flow().is_linear() || !g.flow().is_linear()) {
    throw UnsupportedScheme("modified parareal requires a linear flow");
  }
  const std::size_t N = grid.n_coarse;
  const double tol = opt.stop_tol * std::max(1.0, frobenius_norm(u0));
  const std::size_t cap = std::min((N + 1) * (opt.k_max + 1), u0.size());

  // Every supported flow is autonomous and the grid is uniform, so one image
  // per basis block serves all intervals.
  const double t0 = grid.time(0), t1 = grid.time(1);
  const DenseMatrix zero(u0.rows(), u0.cols());
  DenseMatrix f_zero, g_zero;
  if (affine) {
    f_zero = f.propagate(t0, t1, zero);
    g_zero = g.propagate(t0, t1, zero);
  }

  PararealRun run;
  run.grid = grid;
  record(run, opt, coarse_sweep(g, grid, u0));

  FrobeniusBasis basis(u0.rows(), u0.cols());
  std::vector<DenseMatrix> images;
  for (std::size_t k = 0; k < opt.k_max; ++k) {
    const std::size_t first_new = basis.size();
    for (const auto& u : run.iterates.back()) {
      if (basis.size() >= cap) break;
      basis.append(u);
    }
    run.subspace_dims.push_back(basis.size());
    images.resize(basis.size());
    parallel_for(basis.size() - first_new, opt.workers, [&](std::size_t i) {
      images[first_new + i] = f.propagate(t0, t1, basis[first_new + i]);
      check_finite(images[first_new + i], 0);
    });

    std::vector<DenseMatrix> next;
    next.reserve(N + 1);
    next.push_back(u0);
    for (std::size_t n = 0; n < N; ++n) {
      const auto proj = project(basis.blocks(), next[n]);
      DenseMatrix fine_part = affine_combination(images, proj.coeffs, affine ? &f_zero : nullptr);
      DenseMatrix coarse_part = g.propagate(grid.time(n), grid.time(n + 1), next[n] - proj.projection);
      DenseMatrix u = fine_part + coarse_part;
      if (affine) u -= g_zero;
      check_finite(u, n);
      next.push_back(std::move(u));
    }
    record(run, opt, std::move(next));
    if (run.increments.back() <= tol) {
      run.converged = true;
      break;
    }
  }
  return run;
}

}  // namespace detail

/// Modified parareal for dU/dt = B U:
///   U^{k+1}_{n+1} = F(P^k U^{k+1}_n) + G((I - P^k) U^{k+1}_n).
inline PararealRun modified_parareal_homogeneous(const Propagator& f, const Propagator& g, const TimeGrid& grid,
                                                 const DenseMatrix& u0, const PararealOptions& opt = {}) {
  if (f.flow().has_source()) {
    throw InvalidArgument("modified_parareal_homogeneous: flow has a source term");
  }
  return detail::modified_parareal(f, g, grid, u0, opt, false);
}

/// Modified parareal for dU/dt = A U + G:
///   U^{k+1}_{n+1} = F(P_k U^{k+1}_n) + G((I - P_k) U^{k+1}_n) - G(0),
/// with F(P_k U) recombined affinely from F(Q_i) and F(0).
inline PararealRun modified_parareal_inhomogeneous(const Propagator& f, const Propagator& g, const TimeGrid& grid,
                                                   const DenseMatrix& u0, const PararealOptions& opt = {}) {
  return detail::modified_parareal(f, g, grid, u0, opt, true);
}

}  // namespace parafun
