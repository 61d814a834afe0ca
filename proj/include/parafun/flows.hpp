#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "parafun/errors.hpp"
#include "parafun/frobenius.hpp"
#include "parafun/matrix.hpp"

namespace parafun {

/// Uniform coarse partition of [t_start, t_end] into `n_coarse` intervals,
/// each split into `n_fine_per_interval` fine steps.
struct TimeGrid {
  double t_start = 0.0;
  double t_end = 1.0;
  std::size_t n_coarse = 1;
  std::size_t n_fine_per_interval = 1;

  void validate() const {
    if (n_coarse < 1) throw InvalidArgument("TimeGrid: n_coarse must be >= 1");
    if (n_fine_per_interval < 1) throw InvalidArgument("TimeGrid: n_fine_per_interval must be >= 1");
    if (!(t_end > t_start)) throw InvalidArgument("TimeGrid: t_end must exceed t_start");
  }

  double coarse_step() const { return (t_end - t_start) / static_cast<double>(n_coarse); }
  double fine_step() const { return coarse_step() / static_cast<double>(n_fine_per_interval); }
  /// T_n; T_N is returned as t_end exactly.
  double time(std::size_t n) const {
    return n == n_coarse ? t_end : t_start + static_cast<double>(n) * coarse_step();
  }
};

enum class FlowKind { linear_homogeneous, linear_inhomogeneous, inverse_riccati, trig_block, steady_residual };

inline const char* to_string(FlowKind k) {
  switch (k) {
    case FlowKind::linear_homogeneous: return "linear_homogeneous";
    case FlowKind::linear_inhomogeneous: return "linear_inhomogeneous";
    case FlowKind::inverse_riccati: return "inverse_riccati";
    case FlowKind::trig_block: return "trig_block";
    case FlowKind::steady_residual: return "steady_residual";
  }
  return "?";
}

/// Right-hand side of an autonomous matrix ODE dX/dt = rhs(X).
///
/// Linear kinds are normalized to dX/dt = L X + C with a constant source C:
///   linear_homogeneous(B)        L = B
///   linear_inhomogeneous(A, G)   L = A,        C = G
///   steady_residual(A, R)        L = -A,       C = R
///   trig_block(A, X0)            L = [[0, A - X0], [-(A - X0), 0]] on (X; Y)
/// The nonlinear inverse_riccati(A, X0) flow is dQ/dt = -Q (A - X0) Q.
class FlowSpec {
 public:
  static FlowSpec linear_homogeneous(DenseMatrix b) {
    require_square(b, "linear_homogeneous");
    return FlowSpec(FlowKind::linear_homogeneous, std::move(b), std::nullopt);
  }

  static FlowSpec linear_inhomogeneous(DenseMatrix op, DenseMatrix source) {
    require_square(op, "linear_inhomogeneous");
    if (source.rows() != op.rows()) {
      throw DimensionError("linear_inhomogeneous: source " + source.shape_string() +
                           " for operator " + op.shape_string());
    }
    return FlowSpec(FlowKind::linear_inhomogeneous, std::move(op), std::move(source));
  }

  static FlowSpec steady_residual(const DenseMatrix& a, DenseMatrix rhs) {
    require_square(a, "steady_residual");
    if (rhs.rows() != a.rows()) {
      throw DimensionError("steady_residual: rhs " + rhs.shape_string() + " for " + a.shape_string());
    }
    return FlowSpec(FlowKind::steady_residual, -a, std::move(rhs));
  }

  static FlowSpec inverse_riccati(const DenseMatrix& a, const DenseMatrix& x0_ref) {
    require_square(a, "inverse_riccati");
    a.require_same_shape(x0_ref, "inverse_riccati");
    return FlowSpec(FlowKind::inverse_riccati, a - x0_ref, std::nullopt);
  }

  static FlowSpec trig_block(const DenseMatrix& a, const DenseMatrix& x0_ref) {
    require_square(a, "trig_block");
    a.require_same_shape(x0_ref, "trig_block");
    const std::size_t n = a.rows();
    const DenseMatrix d = a - x0_ref;
    DenseMatrix b(2 * n, 2 * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        b(i, n + j) = d(i, j);
        b(n + i, j) = -d(i, j);
      }
    return FlowSpec(FlowKind::trig_block, std::move(b), std::nullopt);
  }

  FlowKind kind() const noexcept { return kind_; }
  bool is_linear() const noexcept { return kind_ != FlowKind::inverse_riccati; }
  bool has_source() const noexcept { return source_.has_value(); }
  /// Number of rows a state must have.
  std::size_t state_rows() const noexcept { return op_.rows(); }

  /// L of dX/dt = L X + C (or A - X0 for inverse_riccati).
  const DenseMatrix& linear_operator() const noexcept { return op_; }
  const std::optional<DenseMatrix>& source() const noexcept { return source_; }

  void check_state(const DenseMatrix& x) const {
    if (x.rows() != op_.rows()) {
      throw DimensionError(std::string(to_string(kind_)) + ": state " + x.shape_string() +
                           " for operator " + op_.shape_string());
    }
    if (kind_ == FlowKind::inverse_riccati && x.cols() != op_.rows()) {
      throw DimensionError("inverse_riccati: state must be square, got " + x.shape_string());
    }
    if (source_ && source_->cols() != x.cols()) {
      throw DimensionError(std::string(to_string(kind_)) + ": state " + x.shape_string() +
                           " for source " + source_->shape_string());
    }
  }

  /// dX/dt at state x (time is unused: every supported flow is autonomous).
  DenseMatrix rhs(double /*t*/, const DenseMatrix& x) const {
    check_state(x);
    if (kind_ == FlowKind::inverse_riccati) {
      DenseMatrix mx = op_ * x;
      DenseMatrix out = x * mx;
      return out *= -1.0;
    }
    DenseMatrix out = op_ * x;
    if (source_) out += *source_;
    return out;
  }

 private:
  FlowSpec(FlowKind kind, DenseMatrix op, std::optional<DenseMatrix> source)
      : kind_(kind), op_(std::move(op)), source_(std::move(source)) {}

  static void require_square(const DenseMatrix& m, const char* who) {
    if (!m.is_square() || m.empty()) {
      throw DimensionError(std::string(who) + ": operator " + m.shape_string() + " must be square");
    }
  }

  FlowKind kind_;
  DenseMatrix op_;
  std::optional<DenseMatrix> source_;
};

inline DenseMatrix rhs_eval(const FlowSpec& flow, double t, const DenseMatrix& x) {
  return flow.rhs(t, x);
}

enum class Scheme { explicit_euler, crank_nicolson };

inline const char* to_string(Scheme s) {
  return s == Scheme::explicit_euler ? "euler" : "cn";
}

/// Single-interval time propagator: `steps` uniform sub-steps of `scheme`.
///
/// Immutable after construction.  For Crank-Nicolson the system matrix
/// I - h/2 L is factored eagerly for the nominal interval length; other
/// interval lengths factor a temporary system per call.
class Propagator {
 public:
  Propagator(std::shared_ptr<const FlowSpec> flow, Scheme scheme, std::size_t steps,
             std::optional<double> nominal_interval = std::nullopt)
      : flow_(std::move(flow)), scheme_(scheme), steps_(steps) {
    if (!flow_) throw InvalidArgument("Propagator: null flow");
    if (steps_ < 1) throw InvalidArgument("Propagator: steps must be >= 1");
    if (scheme_ == Scheme::crank_nicolson) {
      if (!flow_->is_linear()) {
        throw UnsupportedScheme(std::string("crank_nicolson requires a linear flow, got ") +
                                to_string(flow_->kind()));
      }
      if (nominal_interval) {
        cn_ = std::make_shared<const CnSystem>(*flow_, *nominal_interval / static_cast<double>(steps_));
      }
    }
  }

  Propagator(FlowSpec flow, Scheme scheme, std::size_t steps,
             std::optional<double> nominal_interval = std::nullopt)
      : Propagator(std::make_shared<const FlowSpec>(std::move(flow)), scheme, steps, nominal_interval) {}

  const FlowSpec& flow() const noexcept { return *flow_; }
  const std::shared_ptr<const FlowSpec>& shared_flow() const noexcept { return flow_; }
  Scheme scheme() const noexcept { return scheme_; }
  std::size_t steps() const noexcept { return steps_; }

  /// State at t1 starting from x0 at t0.
  DenseMatrix propagate(double t0, double t1, const DenseMatrix& x0) const {
    if (!(t1 > t0)) throw InvalidArgument("propagate: t1 must exceed t0");
    flow_->check_state(x0);
    const double h = (t1 - t0) / static_cast<double>(steps_);
    DenseMatrix x = x0;
    if (scheme_ == Scheme::explicit_euler) {
      for (std::size_t s = 0; s < steps_; ++s) {
        const double t = t0 + static_cast<double>(s) * h;
        x.axpy(h, flow_->rhs(t, x));
      }
      return x;
    }
    std::shared_ptr<const CnSystem> local;
    const CnSystem* sys = cn_.get();
    if (sys == nullptr || std::abs(sys->h - h) > 1e-12 * h) {
      local = std::make_shared<const CnSystem>(*flow_, h);
      sys = local.get();
    }
    DenseMatrix rhs;
    for (std::size_t s = 0; s < steps_; ++s) {
      multiply_into(rhs, sys->explicit_part, x);
      if (sys->source) rhs += *sys->source;
      x = sys->lu.solve(rhs);
    }
    return x;
  }

 private:
  // (I - h/2 L) x_new = (I + h/2 L) x_old + h C
  struct CnSystem {
    CnSystem(const FlowSpec& flow, double step)
        : h(step), lu(shifted(flow.linear_operator(), -0.5 * step)),
          explicit_part(shifted(flow.linear_operator(), 0.5 * step)) {
      if (flow.source()) source = *flow.source() * step;
    }
    static DenseMatrix shifted(const DenseMatrix& l, double c) {
      DenseMatrix m = l * c;
      for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) += 1.0;
      return m;
    }
    double h;
    LuFactorization lu;
    DenseMatrix explicit_part;
    std::optional<DenseMatrix> source;
  };

  std::shared_ptr<const FlowSpec> flow_;
  Scheme scheme_;
  std::size_t steps_;
  std::shared_ptr<const CnSystem> cn_;
};

inline DenseMatrix propagate(const Propagator& p, double t0, double t1, const DenseMatrix& x0) {
  return p.propagate(t0, t1, x0);
}

/// sum_i coeffs_i (images_i - zero_image) + zero_image: the image under an
/// affine propagator of sum_i coeffs_i basis_i, given the basis images.
inline DenseMatrix affine_combination(std::span<const DenseMatrix> images, std::span<const double> coeffs,
                                      const DenseMatrix* zero_image) {
  if (images.size() != coeffs.size()) {
    throw DimensionError("affine_combination: " + std::to_string(images.size()) + " images, " +
                         std::to_string(coeffs.size()) + " coefficients");
  }
  if (images.empty()) {
    if (zero_image == nullptr) throw InvalidArgument("affine_combination: nothing to combine");
    return *zero_image;
  }
  DenseMatrix out(images[0].rows(), images[0].cols());
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (zero_image) out.axpy(coeffs[i], images[i] - *zero_image);
    else out.axpy(coeffs[i], images[i]);
  }
  if (zero_image) out += *zero_image;
  return out;
}

/// Propagates sum_i coeffs_i basis_i through a linear (possibly affine)
/// propagator using only the images of the basis blocks and of 0.
inline DenseMatrix propagate_affine(const Propagator& p, double t0, double t1, const BlockFamily& basis,
                                    std::span<const double> coeffs, const DenseMatrix& zero_image) {
  if (!p.flow().is_linear()) throw UnsupportedScheme("propagate_affine: flow is not linear");
  if (basis.size() != coeffs.size()) {
    throw DimensionError("propagate_affine: " + std::to_string(basis.size()) + " blocks, " +
                         std::to_string(coeffs.size()) + " coefficients");
  }
  std::vector<DenseMatrix> images;
  images.reserve(basis.size());
  for (const auto& b : basis) images.push_back(p.propagate(t0, t1, b));
  return affine_combination(images, coeffs, &zero_image);
}

}  // namespace parafun
