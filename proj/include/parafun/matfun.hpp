#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "parafun/errors.hpp"
#include "parafun/flows.hpp"
#include "parafun/matrix.hpp"
#include "parafun/parareal.hpp"
#include "parafun/reference.hpp"

namespace parafun {

enum class MatrixFunction { inverse, exponential, cosine, sine };
enum class Method { sequential_fine, classical, modified };
enum class InitialChoice { zero, identity };

inline const char* to_string(MatrixFunction f) {
  switch (f) {
    case MatrixFunction::inverse: return "inverse";
    case MatrixFunction::exponential: return "exp";
    case MatrixFunction::cosine: return "cos";
    case MatrixFunction::sine: return "sin";
  }
  return "?";
}

inline const char* to_string(Method m) {
  switch (m) {
    case Method::sequential_fine: return "sequential";
    case Method::classical: return "classical";
    case Method::modified: return "modified";
  }
  return "?";
}

struct MatFunRequest {
  MatrixFunction function = MatrixFunction::inverse;
  Method method = Method::classical;
  TimeGrid grid{0.0, 1.0, 25, 200};
  Scheme fine_scheme = Scheme::explicit_euler;
  Scheme coarse_scheme = Scheme::explicit_euler;
  std::size_t coarse_steps = 1;
  /// Power-of-two pre-scaling exponent.  For cosine/sine this is a lower
  /// bound on the exponent chosen from ||a||_inf.
  unsigned scale_pow = 0;
  /// Homotopy start X0; defaults to identity for the inverse, zero otherwise.
  std::optional<InitialChoice> x0_choice;
  std::size_t k_max = 50;
  double stop_tol = 1e-12;
  std::size_t workers = 0;
  /// Inverse only: residual ||a X - I||_inf above this flags non-convergence.
  double residual_bound = 0.5;
  /// Also run the sequential fine solve and report errors against it.
  bool track_fine_errors = false;
  /// Exact f(a), when known, for error_vs_reference.
  std::optional<DenseMatrix> reference;
};

struct MatFunReport {
  DenseMatrix result;
  std::optional<DenseMatrix> sine;  ///< cos/sin drivers, only when no scaling was needed
  PararealRun run;
  std::vector<DenseMatrix> fine_trajectory;  ///< filled when track_fine_errors
  std::optional<double> error_vs_reference;
  /// Recovered f(a) from U^k_N compared to the reference, per iteration k.
  std::vector<double> errors_vs_reference;
  double residual = 0.0;  ///< inverse: ||a result - I||_inf
  bool converged = true;
  unsigned scale_pow = 0;
  /// Round-off amplification bound of the recovery step (4^m for the
  /// double-angle formula, 2^m for squaring, 1 otherwise).
  double recovery_amplification = 1.0;
  std::vector<std::pair<std::string, double>> phase_seconds;
};

/// A(t) = X0 + t (A - X0).
inline DenseMatrix homotopy_path(const DenseMatrix& a, const DenseMatrix& x0, double t) {
  a.require_same_shape(x0, "homotopy_path");
  DenseMatrix out = x0;
  out.axpy(t, a - x0);
  return out;
}

/// max_ij |x - ref| / max_ij |ref|.
inline double relative_maxabs_error(const DenseMatrix& x, const DenseMatrix& ref) {
  x.require_same_shape(ref, "relative_maxabs_error");
  const double den = max_abs(ref);
  if (den == 0.0) throw InvalidArgument("relative_maxabs_error: reference is identically zero");
  return max_abs(x - ref) / den;
}

namespace detail {

class PhaseTimer {
 public:
  explicit PhaseTimer(MatFunReport& r) : report_(r), start_(std::chrono::steady_clock::now()) {}
  void lap(const char* name) {
    const auto now = std::chrono::steady_clock::now();
    report_.phase_seconds.emplace_back(name, std::chrono::duration<double>(now - start_).count());
    start_ = now;
  }

 private:
  MatFunReport& report_;
  std::chrono::steady_clock::time_point start_;
};

template <class Recover>
void run_flow(MatFunReport& report, const MatFunRequest& req, const FlowSpec& flow_spec, const DenseMatrix& u0,
              Recover&& recover) {
  req.grid.validate();
  PhaseTimer timer(report);
  auto flow = std::make_shared<const FlowSpec>(flow_spec);
  const Propagator fine(flow, req.fine_scheme, req.grid.n_fine_per_interval, req.grid.coarse_step());

  if (req.track_fine_errors || req.method == Method::sequential_fine) {
    report.fine_trajectory = sequential_fine(fine, req.grid, u0);
    timer.lap("sequential_fine");
  }

  if (req.method == Method::sequential_fine) {
    report.run.grid = req.grid;
    report.run.iterates.push_back(report.fine_trajectory);
    report.run.increments.push_back(0.0);
    report.run.errors_vs_fine.push_back(0.0);
    report.run.converged = true;
  } else {
    const Propagator coarse(flow, req.coarse_scheme, req.coarse_steps, req.grid.coarse_step());
    PararealOptions opt;
    opt.k_max = req.k_max;
    opt.stop_tol = req.stop_tol;
    opt.workers = req.workers;
    if (req.track_fine_errors) opt.fine_reference = &report.fine_trajectory;
    if (req.method == Method::classical) {
      report.run = classical_parareal(fine, coarse, req.grid, u0, opt);
    } else if (flow->has_source()) {
      report.run = modified_parareal_inhomogeneous(fine, coarse, req.grid, u0, opt);
    } else {
      report.run = modified_parareal_homogeneous(fine, coarse, req.grid, u0, opt);
    }
    timer.lap("parareal");
  }

  report.converged = report.run.converged;
  report.result = recover(report.run.final_state());
  if (req.reference) {
    for (const auto& level : report.run.iterates) {
      report.errors_vs_reference.push_back(relative_maxabs_error(recover(level.back()), *req.reference));
    }
    report.error_vs_reference = report.errors_vs_reference.back();
  }
  timer.lap("recovery");
}

}  // namespace detail

/// a^{-1} from dQ/dt = -Q (A_s - I) Q, Q(0) = I, with A_s = a / 2^m:
/// Q(1) = A_s^{-1}, so a^{-1} = 2^{-m} Q(1).
inline MatFunReport inverse_via_ode(const DenseMatrix& a, const MatFunRequest& req) {
  detail::require_square(a, "inverse_via_ode");
  if (req.method == Method::modified) {
    throw UnsupportedScheme("inverse_via_ode: the inverse flow is nonlinear; modified parareal needs a linear flow");
  }
  const std::size_t n = a.rows();
  const double down = std::ldexp(1.0, -static_cast<int>(req.scale_pow));
  const DenseMatrix scaled = a * down;
  // (t a)^{-1} does not exist at t = 0, so the path must start at I.
  if (req.x0_choice.value_or(InitialChoice::identity) != InitialChoice::identity) {
    throw InvalidArgument("inverse_via_ode: X0 must be the identity");
  }
  const DenseMatrix x0 = DenseMatrix::identity(n);
  MatFunReport report;
  report.scale_pow = req.scale_pow;
  detail::run_flow(report, req, FlowSpec::inverse_riccati(scaled, x0), x0,
                   [&](const DenseMatrix& q) { return q * down; });
  report.residual = norm_inf(a * report.result - DenseMatrix::identity(n));
  if (!(report.residual <= req.residual_bound)) report.converged = false;
  return report;
}

/// exp(a) from dQ/dt = A_s Q, Q(0) = I, A_s = a / 2^m, followed by m squarings.
inline MatFunReport exp_via_ode(const DenseMatrix& a, const MatFunRequest& req) {
  detail::require_square(a, "exp_via_ode");
  const std::size_t n = a.rows();
  const unsigned m = req.scale_pow;
  MatFunReport report;
  report.scale_pow = m;
  report.recovery_amplification = std::ldexp(1.0, static_cast<int>(m));
  auto recover = [m](const DenseMatrix& q) {
    DenseMatrix e = q;
    for (unsigned i = 0; i < m; ++i) {
      e = e * e;
      if (!e.all_finite()) throw NumericError("exp_via_ode: overflow in squaring step " + std::to_string(i + 1));
    }
    return e;
  };
  detail::run_flow(report, req, FlowSpec::linear_homogeneous(a * std::ldexp(1.0, -static_cast<int>(m))),
                   DenseMatrix::identity(n), recover);
  return report;
}

/// cos(a) (and sin(a) when no scaling is needed) from the block flow
/// d(X; Y)/dt = [[0, A0 - X0], [-(A0 - X0), 0]] (X; Y), X(0) = sin(X0),
/// Y(0) = cos(X0), A0 = 2^{-m} a, then m double-angle steps
/// C_{i+1} = 2 C_i^2 - I.
inline MatFunReport cos_sin_via_ode(const DenseMatrix& a, const MatFunRequest& req) {
  detail::require_square(a, "cos_sin_via_ode");
  const std::size_t n = a.rows();
  const unsigned m = std::max(scaling_exponent(a), req.scale_pow);
  const DenseMatrix a0 = a * std::ldexp(1.0, -static_cast<int>(m));
  const DenseMatrix id = DenseMatrix::identity(n);

  DenseMatrix x0_ref(n, n), u0;
  if (req.x0_choice.value_or(InitialChoice::zero) == InitialChoice::identity) {
    x0_ref = id;
    u0 = vstack(id * std::sin(1.0), id * std::cos(1.0));
  } else {
    u0 = vstack(DenseMatrix(n, n), id);
  }

  MatFunReport report;
  report.scale_pow = m;
  report.recovery_amplification = std::ldexp(1.0, 2 * static_cast<int>(m));
  auto recover = [&](const DenseMatrix& state) {
    DenseMatrix c = row_block(state, n, n);
    for (unsigned i = 0; i < m; ++i) c = c * c * 2.0 - id;
    return c;
  };
  detail::run_flow(report, req, FlowSpec::trig_block(a0, x0_ref), u0, recover);
  if (m == 0) report.sine = row_block(report.run.final_state(), 0, n);
  return report;
}

}  // namespace parafun
