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

// Virtual-control parareal for the steady flow dX/dt = RHS - A X + B u,
// discretized with explicit Euler on the fine grid.  u is piecewise constant
// per fine step; the adjoint is the exact discrete adjoint of the forward
// scheme, so gradients are gradients of the discrete cost.

namespace parafun {

struct ControlProblem {
  DenseMatrix a;
  DenseMatrix rhs;
  DenseMatrix b_ctrl;  ///< n x p control injection map
  TimeGrid grid{0.0, 1.0, 4, 10};
  double alpha = 1000.0;  ///< terminal residual weight
  double epsilon = 0.01;  ///< jump penalty
  double rho = 1e-3;      ///< initial descent step
  DenseMatrix x0;
  std::size_t workers = 0;

  void validate() const {
    grid.validate();
    if (!a.is_square() || a.empty()) throw DimensionError("control: A " + a.shape_string() + " not square");
    if (rhs.rows() != a.rows()) throw DimensionError("control: RHS " + rhs.shape_string());
    if (b_ctrl.rows() != a.rows() || b_ctrl.cols() == 0) throw DimensionError("control: B " + b_ctrl.shape_string());
    rhs.require_same_shape(x0, "control: X0");
    if (!(alpha > 0.0) || !(epsilon > 0.0) || !(rho > 0.0)) {
      throw InvalidArgument("control: alpha, epsilon and rho must be positive");
    }
  }
  std::size_t controls() const noexcept { return b_ctrl.cols(); }
};

struct ControlState {
  std::vector<std::vector<DenseMatrix>> u;  ///< u[k][j], fine step j of interval k
  std::vector<DenseMatrix> lambdas;         ///< lambda_k, k = 0..N-1; lambda_0 = X0
  std::vector<std::vector<DenseMatrix>> y;  ///< y[k][0..J]
  std::vector<std::vector<DenseMatrix>> p;  ///< p[k][0..J]
  double cost = 0.0;
};

struct ControlGradient {
  std::vector<std::vector<DenseMatrix>> u;
  std::vector<DenseMatrix> lambdas;  ///< entry 0 is zero
};

/// G = I - dT A, one coarse Euler step of the homogeneous part.
inline DenseMatrix coarse_block(const ControlProblem& prob) {
  DenseMatrix g = DenseMatrix::identity(prob.a.rows());
  g.axpy(-prob.grid.coarse_step(), prob.a);
  return g;
}

/// u = 0 and lambda from one coarse Euler sweep.
inline ControlState initial_state(const ControlProblem& prob) {
  prob.validate();
  const std::size_t N = prob.grid.n_coarse, J = prob.grid.n_fine_per_interval;
  const double dT = prob.grid.coarse_step();
  ControlState s;
  s.u.assign(N, std::vector<DenseMatrix>(J, DenseMatrix(prob.controls(), prob.rhs.cols())));
  s.lambdas.push_back(prob.x0);
  for (std::size_t k = 1; k < N; ++k) {
    const DenseMatrix& prev = s.lambdas.back();
    DenseMatrix next = prev;
    next.axpy(dT, prob.rhs - prob.a * prev);
    s.lambdas.push_back(std::move(next));
  }
  return s;
}

namespace detail {

inline void check_control_state(const ControlProblem& prob, const ControlState& s) {
  const std::size_t N = prob.grid.n_coarse, J = prob.grid.n_fine_per_interval;
  if (s.lambdas.size() != N || s.u.size() != N) throw DimensionError("control state: expected " + std::to_string(N) + " intervals");
  for (const auto& uk : s.u)
    if (uk.size() != J) throw DimensionError("control state: expected " + std::to_string(J) + " controls per interval");
}

}  // namespace detail

/// Integrates every interval from lambda_k, concurrently.
inline void forward_sweep(const ControlProblem& prob, ControlState& s) {
  detail::check_control_state(prob, s);
  const std::size_t N = prob.grid.n_coarse, J = prob.grid.n_fine_per_interval;
  const double h = prob.grid.fine_step();
  s.y.assign(N, {});
  parallel_for(N, prob.workers, [&](std::size_t k) {
    auto& yk = s.y[k];
    yk.reserve(J + 1);
    yk.push_back(s.lambdas[k]);
    for (std::size_t j = 0; j < J; ++j) {
      DenseMatrix f = prob.rhs - prob.a * yk.back();
      f += prob.b_ctrl * s.u[k][j];
      DenseMatrix next = yk.back();
      next.axpy(h, f);
      if (!next.all_finite()) throw IntervalError(k, "non-finite forward state");
      yk.push_back(std::move(next));
    }
  });
}

/// alpha/2 ||RHS - A y_{N-1}(T)||^2 + 1/2 sum h ||u_j||^2
///   + 1/(2 eps dT) sum_{k>=1} ||y_{k-1}(T_k) - lambda_k||^2.
inline double cost_eval(const ControlProblem& prob, const ControlState& s) {
  const std::size_t N = prob.grid.n_coarse;
  if (s.y.size() != N) throw InvalidArgument("cost_eval: forward sweep missing");
  const double h = prob.grid.fine_step(), dT = prob.grid.coarse_step();
  const double term = frobenius_norm(prob.rhs - prob.a * s.y.back().back());
  double control = 0.0;
  for (const auto& uk : s.u)
    for (const auto& uj : uk) control += h * frobenius_inner(uj, uj);
  double jumps = 0.0;
  for (std::size_t k = 1; k < N; ++k) {
    const double d = frobenius_norm(s.y[k - 1].back() - s.lambdas[k]);
    jumps += d * d;
  }
  return 0.5 * prob.alpha * term * term + 0.5 * control + jumps / (2.0 * prob.epsilon * dT);
}

/// Discrete adjoint p_j = (I - h A)^T p_{j+1}, with terminal data
/// -alpha A^T (RHS - A y) on the last interval and
/// (y_k(T_{k+1}) - lambda_{k+1}) / (eps dT) on the others.
inline void adjoint_sweep(const ControlProblem& prob, ControlState& s) {
  const std::size_t N = prob.grid.n_coarse, J = prob.grid.n_fine_per_interval;
  if (s.y.size() != N) throw InvalidArgument("adjoint_sweep: forward sweep missing");
  const double h = prob.grid.fine_step(), dT = prob.grid.coarse_step();
  const DenseMatrix at = prob.a.transpose();
  s.p.assign(N, {});
  parallel_for(N, prob.workers, [&](std::size_t k) {
    auto& pk = s.p[k];
    pk.assign(J + 1, DenseMatrix());
    if (k + 1 == N) {
      pk[J] = at * (prob.rhs - prob.a * s.y[k].back()) * (-prob.alpha);
    } else {
      pk[J] = (s.y[k].back() - s.lambdas[k + 1]) * (1.0 / (prob.epsilon * dT));
    }
    for (std::size_t j = J; j-- > 0;) {
      pk[j] = pk[j + 1];
      pk[j].axpy(-h, at * pk[j + 1]);
      if (!pk[j].all_finite()) throw IntervalError(k, "non-finite adjoint state");
    }
  });
}

/// Gradient of the cost in the L2(0, T) inner product for u and the
/// Euclidean one for lambda.
inline ControlGradient control_gradient(const ControlProblem& prob, const ControlState& s) {
  const std::size_t N = prob.grid.n_coarse, J = prob.grid.n_fine_per_interval;
  if (s.p.size() != N) throw InvalidArgument("control_gradient: adjoint sweep missing");
  const double dT = prob.grid.coarse_step();
  const DenseMatrix bt = prob.b_ctrl.transpose();
  ControlGradient g;
  g.u.resize(N);
  for (std::size_t k = 0; k < N; ++k) {
    g.u[k].reserve(J);
    for (std::size_t j = 0; j < J; ++j) g.u[k].push_back(s.u[k][j] + bt * s.p[k][j + 1]);
  }
  g.lambdas.push_back(DenseMatrix(prob.rhs.rows(), prob.rhs.cols()));
  for (std::size_t k = 1; k < N; ++k) {
    DenseMatrix gl = s.p[k][0];
    gl.axpy(-1.0 / (prob.epsilon * dT), s.y[k - 1].back() - s.lambdas[k]);
    g.lambdas.push_back(std::move(gl));
  }
  return g;
}

/// (M L)_0 = l_0, (M L)_n = l_n - F_{n-1} l_{n-1}.
inline std::vector<DenseMatrix> apply_propagation_matrix(const std::vector<DenseMatrix>& blocks,
                                                         const std::vector<DenseMatrix>& lambdas) {
  if (lambdas.empty() || blocks.size() + 1 != lambdas.size()) {
    throw DimensionError("apply_propagation_matrix: need one block per interval boundary");
  }
  std::vector<DenseMatrix> out{lambdas[0]};
  for (std::size_t n = 1; n < lambdas.size(); ++n) out.push_back(lambdas[n] - blocks[n - 1] * lambdas[n - 1]);
  return out;
}

/// M^{-1} w by block forward substitution.
inline std::vector<DenseMatrix> apply_propagation_inverse(const std::vector<DenseMatrix>& blocks,
                                                          const std::vector<DenseMatrix>& w) {
  if (w.empty() || blocks.size() + 1 != w.size()) {
    throw DimensionError("apply_propagation_inverse: need one block per interval boundary");
  }
  std::vector<DenseMatrix> z{w[0]};
  for (std::size_t n = 1; n < w.size(); ++n) z.push_back(w[n] + blocks[n - 1] * z[n - 1]);
  return z;
}

/// M^{-T} g by block backward substitution.
inline std::vector<DenseMatrix> apply_propagation_adjoint_inverse(const std::vector<DenseMatrix>& blocks,
                                                                  const std::vector<DenseMatrix>& g) {
  if (g.empty() || blocks.size() + 1 != g.size()) {
    throw DimensionError("apply_propagation_adjoint_inverse: need one block per interval boundary");
  }
  const std::size_t N = g.size();
  std::vector<DenseMatrix> w(N);
  w[N - 1] = g[N - 1];
  for (std::size_t n = N - 1; n-- > 0;) w[n] = g[n] + blocks[n].transpose() * w[n + 1];
  return w;
}

/// lambda search direction M~^{-1} M~^{-T} g with the coarse blocks.
inline std::vector<DenseMatrix> precondition_jumps(const ControlProblem& prob, const std::vector<DenseMatrix>& g) {
  const std::vector<DenseMatrix> blocks(g.size() - 1, coarse_block(prob));
  return apply_propagation_inverse(blocks, apply_propagation_adjoint_inverse(blocks, g));
}

/// u -= rho g_u, lambda_k -= rho d_k for k >= 1.
inline void apply_gradient(ControlState& s, const ControlGradient& g, const std::vector<DenseMatrix>& lambda_dir,
                           double rho) {
  for (std::size_t k = 0; k < s.u.size(); ++k)
    for (std::size_t j = 0; j < s.u[k].size(); ++j) s.u[k][j].axpy(-rho, g.u[k][j]);
  for (std::size_t k = 1; k < s.lambdas.size(); ++k) s.lambdas[k].axpy(-rho, lambda_dir[k]);
}

/// One preconditioned gradient step with step prob.rho; needs both sweeps.
inline void gradient_step(const ControlProblem& prob, ControlState& s) {
  const ControlGradient g = control_gradient(prob, s);
  apply_gradient(s, g, precondition_jumps(prob, g.lambdas), prob.rho);
}

/// max_k ||y_{k-1}(T_k) - lambda_k||_F.
inline double max_jump(const ControlState& s) {
  double m = 0.0;
  for (std::size_t k = 1; k < s.lambdas.size(); ++k) m = std::max(m, frobenius_norm(s.y[k - 1].back() - s.lambdas[k]));
  return m;
}

/// y(T) of the uncontrolled fine Euler flow from X0.
inline DenseMatrix uncontrolled_terminal(const ControlProblem& prob) {
  prob.validate();
  const double h = prob.grid.fine_step();
  DenseMatrix y = prob.x0;
  const std::size_t steps = prob.grid.n_coarse * prob.grid.n_fine_per_interval;
  for (std::size_t i = 0; i < steps; ++i) y.axpy(h, prob.rhs - prob.a * y);
  return y;
}

struct ControlResult {
  DenseMatrix x;  ///< y_{N-1}(T)
  double terminal_residual = 0.0;  ///< ||RHS - A x||_F
  double max_jump = 0.0;
  std::vector<double> cost_history;  ///< entry m after m accepted steps
  std::vector<double> residual_history;
  std::vector<double> jump_history;
  std::size_t iterations = 0;
  bool converged = false;
  double rho = 0.0;  ///< step after backtracking
  ControlState state;
};

/// Gradient descent on J_eps from u = 0 and coarse lambdas until
/// J_eps <= tol or m_max steps.  A rejected step halves rho; ten rejections
/// in a row raise StallError.
inline ControlResult solve_steady_control(const ControlProblem& prob, std::size_t m_max, double tol) {
  ControlState s = initial_state(prob);
  forward_sweep(prob, s);
  s.cost = cost_eval(prob, s);

  ControlResult res;
  auto record = [&] {
    res.cost_history.push_back(s.cost);
    res.residual_history.push_back(frobenius_norm(prob.rhs - prob.a * s.y.back().back()));
    res.jump_history.push_back(max_jump(s));
  };
  record();
  double rho = prob.rho;
  std::size_t rejected = 0;
  std::size_t m = 0;
  while (s.cost > tol && m < m_max) {
    adjoint_sweep(prob, s);
    const ControlGradient g = control_gradient(prob, s);
    const std::vector<DenseMatrix> dir = precondition_jumps(prob, g.lambdas);
    for (;;) {
      ControlState trial = s;
      apply_gradient(trial, g, dir, rho);
      forward_sweep(prob, trial);
      trial.cost = cost_eval(prob, trial);
      if (trial.cost <= s.cost) {
        s = std::move(trial);
        rejected = 0;
        break;
      }
      if (++rejected >= 10) {
        throw StallError("control: cost did not decrease in 10 consecutive steps (rho = " + std::to_string(rho) +
                         "); use a smaller rho");
      }
      rho *= 0.5;
    }
    ++m;
    record();
  }
  res.converged = s.cost <= tol;
  res.iterations = m;
  res.rho = rho;
  res.x = s.y.back().back();
  res.terminal_residual = res.residual_history.back();
  res.max_jump = res.jump_history.back();
  res.state = std::move(s);
  return res;
}

}  // namespace parafun
