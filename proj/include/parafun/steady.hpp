#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "parafun/errors.hpp"
#include "parafun/frobenius.hpp"
#include "parafun/matrix.hpp"

namespace parafun {

/// Iterate X, accelerator u and residual r of an accelerated steady-state run.
struct AccelState {
  DenseMatrix x;
  DenseMatrix u;
  DenseMatrix r;
  std::size_t k = 0;
  std::vector<double> dt_history;
};

/// ||F(Y)|| / ||F(X)|| of the accelerated run Y against the plain run X.
struct RatioHistory {
  std::vector<double> times;
  std::vector<double> ratio;
};

struct AccelOptions {
  /// Zero the accelerator once the elapsed pseudo-time exceeds this value.
  std::optional<double> cutoff_time;
  /// Residual norm treated as divergence.
  double divergence_bound = 1e12;
  /// Steepest descent only: stop once ||r|| <= tol * ||r0||.
  double tol = 0.0;
};

struct AccelResult {
  DenseMatrix x;        ///< accelerated iterate
  DenseMatrix x_plain;  ///< unaccelerated twin
  RatioHistory hist;
  std::vector<double> residuals;        ///< ||b - A Y^k||, k = 0..K
  std::vector<double> plain_residuals;  ///< ||b - A X^k||
  std::vector<double> dt_history;
  /// Steepest descent: max_k ||r_rec - (b - A X)|| / ||r_0||.
  double max_drift = 0.0;
  std::size_t iterations = 0;
};

/// u^0 = x_tilde - x0.
inline DenseMatrix accelerator_init(const DenseMatrix& x_tilde, const DenseMatrix& x0) {
  x_tilde.require_same_shape(x0, "accelerator_init");
  return x_tilde - x0;
}

/// (I - dt A) u.
inline DenseMatrix accelerator_step(const DenseMatrix& u, const DenseMatrix& a, double dt) {
  if (!a.is_square() || a.cols() != u.rows()) {
    throw DimensionError("accelerator_step: " + a.shape_string() + " and " + u.shape_string());
  }
  DenseMatrix out = u;
  out.axpy(-dt, a * u);
  return out;
}

namespace detail {

inline double ratio_of(double num, double den) {
  if (den == 0.0) return num == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

inline void check_system(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& x0, const char* who) {
  if (!a.is_square() || a.empty()) throw DimensionError(std::string(who) + ": " + a.shape_string() + " not square");
  if (b.rows() != a.rows()) throw DimensionError(std::string(who) + ": rhs " + b.shape_string());
  b.require_same_shape(x0, who);
}

inline void check_divergence(double res, const AccelOptions& opt, std::size_t k) {
  if (!(res <= opt.divergence_bound)) {
    throw DivergenceError("residual " + std::to_string(res) + " at iteration " + std::to_string(k));
  }
}

// X^{k+1} = X^k + dt (b - A X^k + u^k), u^{k+1} = (I - dt A) u^k, with the
// plain twin (u = 0) run alongside.
inline AccelResult accelerated_richardson(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& x0,
                                          const DenseMatrix& x_tilde, double dt, std::size_t k_max,
                                          const AccelOptions& opt, const char* who) {
  check_system(a, b, x0, who);
  if (!(dt > 0.0)) throw InvalidArgument(std::string(who) + ": dt must be positive");

  AccelResult res;
  AccelState acc{x0, accelerator_init(x_tilde, x0), b - a * x0, 0, {}};
  DenseMatrix plain = x0;
  DenseMatrix plain_r = acc.r;

  auto record = [&](std::size_t k) {
    const double ny = frobenius_norm(acc.r), nx = frobenius_norm(plain_r);
    check_divergence(ny, opt, k);
    check_divergence(nx, opt, k);
    res.residuals.push_back(ny);
    res.plain_residuals.push_back(nx);
    res.hist.times.push_back(static_cast<double>(k) * dt);
    res.hist.ratio.push_back(ratio_of(ny, nx));
  };
  record(0);

  for (std::size_t k = 0; k < k_max; ++k) {
    if (opt.cutoff_time && static_cast<double>(k) * dt > *opt.cutoff_time) acc.u = DenseMatrix(b.rows(), b.cols());
    acc.x.axpy(dt, acc.r + acc.u);
    acc.u = accelerator_step(acc.u, a, dt);
    plain.axpy(dt, plain_r);
    acc.r = b - a * acc.x;
    plain_r = b - a * plain;
    acc.dt_history.push_back(dt);
    acc.k = k + 1;
    record(k + 1);
  }
  res.x = std::move(acc.x);
  res.x_plain = std::move(plain);
  res.dt_history = std::move(acc.dt_history);
  res.iterations = acc.k;
  return res;
}

}  // namespace detail

/// Simple gradient acceleration for A X = b.
inline AccelResult simple_gradient_accelerated(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& x0,
                                               const DenseMatrix& x_tilde, double dt, std::size_t k_max,
                                               const AccelOptions& opt = {}) {
  return detail::accelerated_richardson(a, b, x0, x_tilde, dt, k_max, opt, "simple_gradient_accelerated");
}

/// Accelerated flow dX/dt = I - A X towards A^{-1}.
inline AccelResult inverse_accelerated(const DenseMatrix& a, const DenseMatrix& x0, const DenseMatrix& x_tilde,
                                       double dt, std::size_t k_max, const AccelOptions& opt = {}) {
  if (!a.is_square()) throw DimensionError("inverse_accelerated: " + a.shape_string() + " not square");
  return detail::accelerated_richardson(a, DenseMatrix::identity(a.rows()), x0, x_tilde, dt, k_max, opt,
                                        "inverse_accelerated");
}

/// Steepest descent acceleration: dt_k = <r,r>/<Ar,r>,
/// X += dt_k (r + u), r -= dt_k A (r + u), u = (I - dt_k A) u.
/// History times are iteration indices.
inline AccelResult steepest_descent_accelerated(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& x0,
                                                const DenseMatrix& x_tilde, std::size_t k_max,
                                                const AccelOptions& opt = {}) {
  detail::check_system(a, b, x0, "steepest_descent_accelerated");
  AccelResult res;
  AccelState acc{x0, accelerator_init(x_tilde, x0), b - a * x0, 0, {}};
  DenseMatrix plain = x0;
  DenseMatrix plain_r = acc.r;
  const double r0 = frobenius_norm(acc.r);
  double elapsed = 0.0;

  auto sd_step = [](const DenseMatrix& a, const DenseMatrix& r) {
    const DenseMatrix ar = a * r;
    const double den = frobenius_inner(ar, r);
    if (!(den > 0.0)) throw NotSpdError("steepest descent: <Ar, r> = " + std::to_string(den));
    return frobenius_inner(r, r) / den;
  };
  auto record = [&](std::size_t k) {
    const double ny = frobenius_norm(acc.r), nx = frobenius_norm(plain_r);
    detail::check_divergence(ny, opt, k);
    res.residuals.push_back(ny);
    res.plain_residuals.push_back(nx);
    res.hist.times.push_back(static_cast<double>(k));
    res.hist.ratio.push_back(detail::ratio_of(ny, nx));
  };
  record(0);

  for (std::size_t k = 0; k < k_max; ++k) {
    const double ny = frobenius_norm(acc.r);
    if (ny == 0.0 || ny <= opt.tol * r0) break;
    if (opt.cutoff_time && elapsed > *opt.cutoff_time) acc.u = DenseMatrix(b.rows(), b.cols());
    const double dt = sd_step(a, acc.r);
    const DenseMatrix dir = acc.r + acc.u;
    acc.x.axpy(dt, dir);
    acc.r.axpy(-dt, a * dir);
    acc.u = accelerator_step(acc.u, a, dt);
    acc.dt_history.push_back(dt);
    elapsed += dt;
    if (r0 > 0.0) res.max_drift = std::max(res.max_drift, frobenius_norm(acc.r - (b - a * acc.x)) / r0);

    if (frobenius_norm(plain_r) > 0.0) {
      const double dtp = sd_step(a, plain_r);
      plain.axpy(dtp, plain_r);
      plain_r.axpy(-dtp, a * plain_r);
    }
    acc.k = k + 1;
    record(k + 1);
  }
  res.x = std::move(acc.x);
  res.x_plain = std::move(plain);
  res.dt_history = std::move(acc.dt_history);
  res.iterations = acc.k;
  return res;
}

struct CgResult {
  DenseMatrix x;
  std::vector<DenseMatrix> iterates;  ///< X^0 .. X^K
  std::vector<double> residuals;
  std::size_t iterations = 0;
  bool converged = false;
};

/// X^{k+1} = X^k + a_k (b - A X^k + V^k) with a_k = <r,r>/<r,Ar> and
/// V^k = (a_CG / a_k) p^k - r^k, which reproduces conjugate gradients.
/// Stops once ||r|| <= tol * max(1, ||b||).
inline CgResult cg_accelerated(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& x0, std::size_t k_max,
                               double tol) {
  detail::check_system(a, b, x0, "cg_accelerated");
  CgResult res;
  DenseMatrix x = x0;
  DenseMatrix r = b - a * x0;
  DenseMatrix p = r;
  double rr = frobenius_inner(r, r);
  const double target = tol * std::max(1.0, frobenius_norm(b));
  res.iterates.push_back(x);
  res.residuals.push_back(std::sqrt(rr));

  for (std::size_t k = 0; k < k_max && std::sqrt(rr) > target; ++k) {
    const DenseMatrix ar = a * r;
    const DenseMatrix ap = a * p;
    const double rar = frobenius_inner(r, ar), pap = frobenius_inner(p, ap);
    if (!(rar > 0.0) || !(pap > 0.0)) throw NotSpdError("cg_accelerated: operator is not positive definite");
    const double alpha_k = rr / rar;
    const double alpha_cg = rr / pap;
    DenseMatrix v = p * (alpha_cg / alpha_k);
    v -= r;
    x.axpy(alpha_k, r + v);
    r.axpy(-alpha_cg, ap);
    const double rr_new = frobenius_inner(r, r);
    p *= rr_new / rr;
    p += r;
    rr = rr_new;
    res.iterates.push_back(x);
    res.residuals.push_back(std::sqrt(rr));
    res.iterations = k + 1;
  }
  res.converged = std::sqrt(rr) <= target;
  res.x = std::move(x);
  return res;
}

}  // namespace parafun
