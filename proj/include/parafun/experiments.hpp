#pragma once

#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "parafun/control.hpp"
#include "parafun/errors.hpp"
#include "parafun/matfun.hpp"
#include "parafun/mtx.hpp"
#include "parafun/reference.hpp"
#include "parafun/steady.hpp"

// Experiment runner behind the `parafun` tool.  Every experiment builds its
// artifacts in memory; nothing touches the output directory until the
// computation has succeeded.

namespace parafun {

/// Invalid experiment configuration (exit status 2).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"fig_inverse", "fig_exp",       "fig_cos",      "acc_grad", "acc_sd",
                                              "acc_inv_approx", "acc_inv_exact", "control_demo", "custom"};
  return names;
}

struct ExperimentConfig {
  std::string experiment;
  std::optional<std::size_t> n;
  std::optional<std::size_t> n_coarse;
  std::optional<std::size_t> n_fine;
  std::optional<double> dt;
  std::optional<unsigned> scale_pow;
  std::optional<std::string> scheme;
  std::optional<std::string> method;
  std::optional<std::string> function;
  std::optional<std::string> family;
  std::optional<std::string> matrix_path;
  std::optional<double> stop_tol;
  std::optional<std::size_t> k_max;
  std::optional<double> cutoff;
  bool no_cutoff = false;
  std::optional<double> alpha;
  std::optional<double> epsilon;
  std::optional<double> rho;
  std::optional<std::size_t> stride;
  std::size_t workers = 0;
};

struct Artifacts {
  std::vector<std::pair<std::string, std::string>> files;  ///< file name, content
  std::vector<std::string> summary;                        ///< human-readable lines
};

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Resolved {
 public:
  template <class T>
  void set(const std::string& key, const T& value) {
    std::ostringstream os;
    if constexpr (std::is_floating_point_v<T>) {
      os << fmt(value);
    } else {
      os << value;
    }
    entries_.emplace_back(key, os.str());
  }
  std::string text() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
    return out;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

inline Scheme parse_scheme(const std::string& s) {
  if (s == "euler") return Scheme::explicit_euler;
  if (s == "cn") return Scheme::crank_nicolson;
  throw ConfigError("unknown scheme '" + s + "' (expected euler or cn)");
}

inline Method parse_method(const std::string& s) {
  if (s == "classical") return Method::classical;
  if (s == "modified") return Method::modified;
  if (s == "sequential") return Method::sequential_fine;
  throw ConfigError("unknown method '" + s + "' (expected classical, modified or sequential)");
}

inline MatrixFunction parse_function(const std::string& s) {
  if (s == "inverse") return MatrixFunction::inverse;
  if (s == "exp") return MatrixFunction::exponential;
  if (s == "cos") return MatrixFunction::cosine;
  if (s == "sin") return MatrixFunction::sine;
  throw ConfigError("unknown function '" + s + "' (expected inverse, exp, cos or sin)");
}

inline ProblemFamily parse_family(const std::string& s) {
  if (s == "laplacian_1d") return ProblemFamily::laplacian_1d;
  if (s == "laplacian_2d") return ProblemFamily::laplacian_2d;
  if (s == "spd_random_shifted") return ProblemFamily::spd_random_shifted;
  throw ConfigError("unknown family '" + s + "' (expected laplacian_1d, laplacian_2d or spd_random_shifted)");
}

inline std::size_t positive(std::optional<std::size_t> v, std::size_t def, const char* name, std::size_t min = 1) {
  const std::size_t x = v.value_or(def);
  if (x < min) throw ConfigError(std::string(name) + " must be >= " + std::to_string(min));
  return x;
}

inline double positive(std::optional<double> v, double def, const char* name) {
  const double x = v.value_or(def);
  if (!(x > 0.0)) throw ConfigError(std::string(name) + " must be positive");
  return x;
}

template <class T>
void reject(const std::optional<T>& v, const char* flag, const std::string& experiment) {
  if (v) throw ConfigError(std::string(flag) + " does not apply to " + experiment);
}

// --- parareal experiments ---------------------------------------------------

inline std::string parareal_csv(const MatFunReport& rep) {
  std::string csv = "iteration,error_vs_fine,error_vs_exact\n";
  const auto& run = rep.run;
  for (std::size_t k = 0; k < run.iterates.size(); ++k) {
    const double ef = k < run.errors_vs_fine.size() ? run.errors_vs_fine[k] : 0.0;
    const double ee = k < rep.errors_vs_reference.size() ? rep.errors_vs_reference[k] : 0.0;
    csv += std::to_string(k) + "," + fmt(ef) + "," + fmt(ee) + "\n";
  }
  return csv;
}

inline std::string parareal_plot(const std::string& title, const std::vector<std::string>& csvs) {
  std::string gp = "set title '" + title + "'\nset xlabel 'iteration'\nset ylabel 'relative max-abs error'\n";
  gp += "set logscale y\nset format y '%.0e'\nset key top right\nset datafile separator ','\nplot ";
  for (std::size_t i = 0; i < csvs.size(); ++i) {
    if (i) gp += ", \\\n     ";
    gp += "'" + csvs[i] + "' using 1:2 skip 1 with linespoints title '" + csvs[i] + " vs fine', \\\n     '" + csvs[i] +
          "' using 1:3 skip 1 with linespoints title '" + csvs[i] + " vs exact'";
  }
  return gp + "\n";
}

inline MatFunReport run_matfun(const DenseMatrix& a, const MatFunRequest& req) {
  switch (req.function) {
    case MatrixFunction::inverse: return inverse_via_ode(a, req);
    case MatrixFunction::exponential: return exp_via_ode(a, req);
    case MatrixFunction::cosine: return cos_sin_via_ode(a, req);
    case MatrixFunction::sine: {
      MatFunRequest cos_req = req;
      cos_req.reference.reset();
      MatFunReport rep = cos_sin_via_ode(a, cos_req);
      if (!rep.sine) throw ConfigError("sin needs ||a||_inf <= 1 and --scale-pow 0 (no double-angle recovery for sine)");
      rep.result = *rep.sine;
      if (req.reference) {
        for (const auto& level : rep.run.iterates) {
          rep.errors_vs_reference.push_back(
              relative_maxabs_error(row_block(level.back(), 0, a.rows()), *req.reference));
        }
        rep.error_vs_reference = rep.errors_vs_reference.back();
      }
      return rep;
    }
  }
  throw ConfigError("unknown function");
}

inline DenseMatrix exact_value(const DenseMatrix& a, MatrixFunction f) {
  switch (f) {
    case MatrixFunction::inverse: return reference_inverse(a);
    case MatrixFunction::exponential: return reference_exp(a);
    case MatrixFunction::cosine: return reference_cos(a);
    case MatrixFunction::sine: return reference_sin(a);
  }
  throw ConfigError("unknown function");
}

inline void resolve_common(const ExperimentConfig& cfg, MatFunRequest& req, Resolved& r, std::size_t n_coarse,
                           std::size_t n_fine, const std::string& scheme, const std::string& method,
                           std::size_t k_max) {
  req.grid = TimeGrid{0.0, 1.0, positive(cfg.n_coarse, n_coarse, "--N"), positive(cfg.n_fine, n_fine, "--J")};
  req.fine_scheme = req.coarse_scheme = parse_scheme(cfg.scheme.value_or(scheme));
  req.method = parse_method(cfg.method.value_or(method));
  req.k_max = positive(cfg.k_max, k_max, "--k-max");
  req.stop_tol = cfg.stop_tol.value_or(1e-12);
  if (!(req.stop_tol >= 0.0)) throw ConfigError("--stop-tol must be >= 0");
  req.workers = cfg.workers;
  req.track_fine_errors = true;
  r.set("N", req.grid.n_coarse);
  r.set("J", req.grid.n_fine_per_interval);
  r.set("T", req.grid.t_end);
  r.set("scheme", to_string(req.fine_scheme));
  r.set("coarse_steps", req.coarse_steps);
  r.set("method", to_string(req.method));
  r.set("k_max", req.k_max);
  r.set("stop_tol", req.stop_tol);
  r.set("workers", resolve_workers(cfg.workers));
}

inline Artifacts finish_parareal(const DenseMatrix& a, MatFunRequest req, Resolved& r, const std::string& title) {
  Artifacts out;
  req.reference = exact_value(a, req.function);
  const MatFunReport rep = run_matfun(a, req);
  r.set("iterations", rep.run.iterations());
  out.files.emplace_back("errors.csv", parareal_csv(rep));
  out.files.emplace_back("config.resolved.txt", r.text());
  out.files.emplace_back("plot.gp", parareal_plot(title, {"errors.csv"}));
  out.summary.push_back(std::string(to_string(req.method)) + ": " + std::to_string(rep.run.iterations()) +
                        " iterations, error vs fine " + fmt(rep.run.errors_vs_fine.back()) + ", error vs exact " +
                        fmt(*rep.error_vs_reference));
  if (req.function == MatrixFunction::inverse) out.summary.push_back("||A X - I||_inf = " + fmt(rep.residual));
  return out;
}

inline Artifacts fig_inverse(const ExperimentConfig& cfg) {
  reject(cfg.matrix_path, "--matrix", cfg.experiment);
  reject(cfg.dt, "--dt", cfg.experiment);
  Resolved r;
  const std::size_t n = positive(cfg.n, 80, "--n", 2);
  const DenseMatrix a = generate({ProblemFamily::laplacian_1d, n, Scaling::mesh()});
  MatFunRequest req;
  req.function = MatrixFunction::inverse;
  req.scale_pow = cfg.scale_pow.value_or(10);
  r.set("experiment", cfg.experiment);
  r.set("matrix", "laplacian_1d scaled by (n+1)^2");
  r.set("n", n);
  r.set("function", "inverse");
  r.set("scale_pow", req.scale_pow);
  r.set("x0", "identity");
  resolve_common(cfg, req, r, 25, 200, "euler", "classical", 25);
  if (req.fine_scheme != Scheme::explicit_euler) throw ConfigError("fig_inverse: the inverse flow is nonlinear; use --scheme euler");
  if (req.method == Method::modified) throw ConfigError("fig_inverse: modified parareal needs a linear flow");
  return finish_parareal(a, req, r, "inverse of the 1D Laplacian");
}

inline Artifacts fig_exp(const ExperimentConfig& cfg) {
  reject(cfg.matrix_path, "--matrix", cfg.experiment);
  reject(cfg.dt, "--dt", cfg.experiment);
  Resolved r;
  const std::size_t n = positive(cfg.n, 80, "--n", 2);
  const unsigned m = cfg.scale_pow.value_or(10);
  const DenseMatrix a = generate({ProblemFamily::laplacian_1d, n, Scaling::mesh()}) * -std::ldexp(1.0, -static_cast<int>(m));
  MatFunRequest req;
  req.function = MatrixFunction::exponential;
  req.scale_pow = 0;
  r.set("experiment", cfg.experiment);
  r.set("matrix", "-laplacian_1d scaled by (n+1)^2 / 2^scale_pow");
  r.set("n", n);
  r.set("function", "exp");
  r.set("scale_pow", m);
  r.set("squarings", 0);
  resolve_common(cfg, req, r, 25, 200, "cn", "classical", 25);
  return finish_parareal(a, req, r, "exp(B), B = -A/2^m");
}

inline Artifacts fig_cos(const ExperimentConfig& cfg) {
  reject(cfg.matrix_path, "--matrix", cfg.experiment);
  reject(cfg.dt, "--dt", cfg.experiment);
  Resolved r;
  const std::size_t n = positive(cfg.n, 32, "--n", 2);
  const DenseMatrix a = generate({ProblemFamily::laplacian_1d, n, Scaling::none()});
  MatFunRequest req;
  req.function = MatrixFunction::cosine;
  req.scale_pow = cfg.scale_pow.value_or(0);
  r.set("experiment", cfg.experiment);
  r.set("matrix", "laplacian_1d");
  r.set("n", n);
  r.set("function", "cos");
  r.set("scale_pow_min", req.scale_pow);
  r.set("scale_pow", std::max(scaling_exponent(a), req.scale_pow));
  r.set("x0", "zero");
  resolve_common(cfg, req, r, 10, 100, "euler", "modified", 10);
  req.reference = reference_cos(a);

  // both variants, so the comparison is always available
  MatFunRequest classical = req, modified = req;
  classical.method = Method::classical;
  modified.method = Method::modified;
  const MatFunReport rc = cos_sin_via_ode(a, classical);
  const MatFunReport rm = cos_sin_via_ode(a, modified);
  r.set("iterations_classical", rc.run.iterations());
  r.set("iterations_modified", rm.run.iterations());

  Artifacts out;
  std::string selected;
  if (req.method == Method::sequential_fine) {
    selected = parareal_csv(cos_sin_via_ode(a, req));
  } else {
    selected = parareal_csv(req.method == Method::classical ? rc : rm);
  }
  out.files.emplace_back("errors.csv", selected);
  out.files.emplace_back("errors_classical.csv", parareal_csv(rc));
  out.files.emplace_back("errors_modified.csv", parareal_csv(rm));
  out.files.emplace_back("config.resolved.txt", r.text());
  out.files.emplace_back("plot.gp", parareal_plot("cos(A), classical vs modified parareal",
                                                  {"errors_classical.csv", "errors_modified.csv"}));
  out.summary.push_back("classical: " + std::to_string(rc.run.iterations()) + " iterations, error vs fine " +
                        fmt(rc.run.errors_vs_fine.back()));
  out.summary.push_back("modified: " + std::to_string(rm.run.iterations()) + " iterations, error vs fine " +
                        fmt(rm.run.errors_vs_fine.back()));
  return out;
}

inline Artifacts custom(const ExperimentConfig& cfg) {
  reject(cfg.dt, "--dt", cfg.experiment);
  Resolved r;
  r.set("experiment", cfg.experiment);
  DenseMatrix a;
  if (cfg.matrix_path) {
    if (cfg.family || cfg.n) throw ConfigError("custom: give either --matrix or --family/--n");
    a = read_matrix(*cfg.matrix_path);
    r.set("matrix", *cfg.matrix_path);
  } else {
    if (!cfg.family) throw ConfigError("custom: --matrix or --family is required");
    const ProblemFamily fam = parse_family(*cfg.family);
    const std::size_t n = positive(cfg.n, 8, "--n", 2);
    a = generate({fam, n, Scaling::none()});
    r.set("matrix", *cfg.family);
    r.set("n", n);
  }
  if (!a.is_square() || a.empty()) throw ConfigError("custom: matrix must be square, got " + a.shape_string());
  MatFunRequest req;
  req.function = parse_function(cfg.function.value_or("inverse"));
  req.scale_pow = cfg.scale_pow.value_or(0);
  r.set("function", to_string(req.function));
  r.set("scale_pow", req.scale_pow);
  const bool inverse = req.function == MatrixFunction::inverse;
  resolve_common(cfg, req, r, 10, 100, "euler", "classical", 25);
  if (inverse && req.fine_scheme != Scheme::explicit_euler) throw ConfigError("custom: the inverse flow needs --scheme euler");
  if (inverse && req.method == Method::modified) throw ConfigError("custom: modified parareal needs a linear flow");
  return finish_parareal(a, req, r, "custom " + std::string(to_string(req.function)));
}

// --- acceleration experiments -----------------------------------------------

inline std::string accel_csv(const AccelResult& res, std::size_t stride) {
  std::string csv = "step,time,residual_plain,residual_accel,ratio\n";
  const std::size_t last = res.hist.ratio.size() - 1;
  for (std::size_t k = 0; k <= last; ++k) {
    if (k % stride != 0 && k != last) continue;
    csv += std::to_string(k) + "," + fmt(res.hist.times[k]) + "," + fmt(res.plain_residuals[k]) + "," +
           fmt(res.residuals[k]) + "," + fmt(res.hist.ratio[k]) + "\n";
  }
  return csv;
}

inline std::string accel_plot(const std::string& title, const std::string& xlabel) {
  return "set title '" + title + "'\nset xlabel '" + xlabel +
         "'\nset logscale y\nset format y '%.0e'\nset datafile separator ','\n"
         "plot 'errors.csv' using 2:3 skip 1 with lines title 'residual, plain', \\\n"
         "     'errors.csv' using 2:4 skip 1 with lines title 'residual, accelerated', \\\n"
         "     'errors.csv' using 2:5 skip 1 with lines title 'ratio'\n";
}

inline Artifacts accel_artifacts(const AccelResult& res, Resolved& r, const ExperimentConfig& cfg,
                                 const std::string& title, const std::string& xlabel) {
  const std::size_t stride = positive(cfg.stride, std::max<std::size_t>(1, res.iterations / 1000), "--stride");
  r.set("stride", stride);
  r.set("iterations", res.iterations);
  Artifacts out;
  out.files.emplace_back("errors.csv", accel_csv(res, stride));
  out.files.emplace_back("config.resolved.txt", r.text());
  out.files.emplace_back("plot.gp", accel_plot(title, xlabel));
  out.summary.push_back(std::to_string(res.iterations) + " steps, residual plain " + fmt(res.plain_residuals.back()) +
                        ", accelerated " + fmt(res.residuals.back()) + ", ratio " + fmt(res.hist.ratio.back()));
  return out;
}

inline AccelOptions accel_options(const ExperimentConfig& cfg, Resolved& r, double def_cutoff) {
  AccelOptions opt;
  if (!cfg.no_cutoff) opt.cutoff_time = cfg.cutoff.value_or(def_cutoff);
  if (cfg.no_cutoff && cfg.cutoff) throw ConfigError("--cutoff and --no-cutoff are exclusive");
  if (opt.cutoff_time) {
    r.set("cutoff_time", *opt.cutoff_time);
  } else {
    r.set("cutoff_time", "none");
  }
  return opt;
}

struct HeatSetup {
  DenseMatrix a, b, x0, x_tilde;
  double h = 0.0;
};

inline HeatSetup heat_setup(const ExperimentConfig& cfg, Resolved& r) {
  reject(cfg.matrix_path, "--matrix", cfg.experiment);
  reject(cfg.n_coarse, "--N", cfg.experiment);
  reject(cfg.n_fine, "--J", cfg.experiment);
  reject(cfg.scheme, "--scheme", cfg.experiment);
  reject(cfg.method, "--method", cfg.experiment);
  const std::size_t n = positive(cfg.n, 127, "--n", 2);
  HeatSetup s;
  s.h = 1.0 / static_cast<double>(n + 1);
  s.a = generate({ProblemFamily::laplacian_1d, n, Scaling::mesh()});
  s.b = DenseMatrix(n, 1, 1.0);
  s.x0 = DenseMatrix(n, 1);
  s.x_tilde = approx_inverse(s.a, ApproxInverseMethod::ilu0(), s.b);
  r.set("experiment", cfg.experiment);
  r.set("matrix", "laplacian_1d scaled by (n+1)^2");
  r.set("n", n);
  r.set("b", "ones");
  r.set("x0", "zero");
  r.set("x_tilde", "ILU(0) solve");
  return s;
}

inline Artifacts acc_grad(const ExperimentConfig& cfg) {
  Resolved r;
  const HeatSetup s = heat_setup(cfg, r);
  const double dt = positive(cfg.dt, s.h * s.h / 4.0, "--dt");
  const double t_end = 2.0;
  const std::size_t steps = positive(cfg.k_max, static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9)), "--k-max");
  r.set("dt", dt);
  r.set("k_max", steps);
  const AccelOptions opt = accel_options(cfg, r, 1.0);
  const AccelResult res = simple_gradient_accelerated(s.a, s.b, s.x0, s.x_tilde, dt, steps, opt);
  return accel_artifacts(res, r, cfg, "simple gradient acceleration, heat problem", "t");
}

inline Artifacts acc_sd(const ExperimentConfig& cfg) {
  reject(cfg.dt, "--dt", cfg.experiment);
  Resolved r;
  const HeatSetup s = heat_setup(cfg, r);
  const std::size_t steps = positive(cfg.k_max, 200, "--k-max");
  r.set("k_max", steps);
  const AccelOptions opt = accel_options(cfg, r, 1.0);
  const AccelResult res = steepest_descent_accelerated(s.a, s.b, s.x0, s.x_tilde, steps, opt);
  r.set("max_drift", res.max_drift);
  return accel_artifacts(res, r, cfg, "steepest descent acceleration, heat problem", "iteration");
}

inline Artifacts acc_inv(const ExperimentConfig& cfg, bool exact) {
  reject(cfg.matrix_path, "--matrix", cfg.experiment);
  reject(cfg.n_coarse, "--N", cfg.experiment);
  reject(cfg.n_fine, "--J", cfg.experiment);
  reject(cfg.scheme, "--scheme", cfg.experiment);
  reject(cfg.method, "--method", cfg.experiment);
  Resolved r;
  const std::size_t n = positive(cfg.n, 15, "--n", 2);
  const DenseMatrix a = generate({ProblemFamily::laplacian_2d, n, Scaling::frobenius()});
  const double dt = positive(cfg.dt, 0.1, "--dt");
  const std::size_t steps = positive(cfg.k_max, 1000, "--k-max");
  const DenseMatrix x0(a.rows(), a.cols());
  const DenseMatrix x_tilde =
      exact ? reference_inverse(a) : approx_inverse(a, ApproxInverseMethod::threshold(0.01));
  r.set("experiment", cfg.experiment);
  r.set("matrix", "laplacian_2d / ||A||_F");
  r.set("n_per_direction", n);
  r.set("x0", "zero");
  r.set("x_tilde", exact ? "exact inverse" : "inverse thresholded at 1% of max entry");
  r.set("dt", dt);
  r.set("k_max", steps);
  const AccelOptions opt = accel_options(cfg, r, 1.0);
  const AccelResult res = inverse_accelerated(a, x0, x_tilde, dt, steps, opt);
  return accel_artifacts(res, r, cfg, exact ? "inverse flow, exact e" : "inverse flow, thresholded e", "t");
}

// --- control ------------------------------------------------------------------

inline Artifacts control_demo(const ExperimentConfig& cfg) {
  reject(cfg.matrix_path, "--matrix", cfg.experiment);
  reject(cfg.dt, "--dt", cfg.experiment);
  reject(cfg.method, "--method", cfg.experiment);
  if (cfg.scheme && *cfg.scheme != "euler") throw ConfigError("control_demo supports --scheme euler only");
  Resolved r;
  const std::size_t n = positive(cfg.n, 1, "--n");
  ControlProblem prob;
  if (n == 1) {
    prob.a = DenseMatrix(1, 1, 1.0);
    r.set("matrix", "scalar a = 1");
  } else {
    prob.a = generate({ProblemFamily::laplacian_1d, n, Scaling::none()});
    r.set("matrix", "laplacian_1d");
  }
  prob.rhs = DenseMatrix::identity(n);
  prob.b_ctrl = DenseMatrix::identity(n);
  prob.x0 = DenseMatrix(n, n);
  prob.grid = TimeGrid{0.0, 1.0, positive(cfg.n_coarse, 4, "--N"), positive(cfg.n_fine, 10, "--J")};
  prob.alpha = positive(cfg.alpha, 1000.0, "--alpha");
  prob.epsilon = positive(cfg.epsilon, 0.01, "--epsilon");
  prob.rho = positive(cfg.rho, 1e-3, "--rho");
  prob.workers = cfg.workers;
  const std::size_t m_max = positive(cfg.k_max, 200, "--k-max");
  const double tol = cfg.stop_tol.value_or(0.0);
  r.set("experiment", cfg.experiment);
  r.set("n", n);
  r.set("rhs", "identity");
  r.set("b_ctrl", "identity");
  r.set("x0", "zero");
  r.set("N", prob.grid.n_coarse);
  r.set("J", prob.grid.n_fine_per_interval);
  r.set("T", prob.grid.t_end);
  r.set("scheme", "euler");
  r.set("alpha", prob.alpha);
  r.set("epsilon", prob.epsilon);
  r.set("rho", prob.rho);
  r.set("k_max", m_max);
  r.set("stop_tol", tol);
  r.set("workers", resolve_workers(cfg.workers));

  const ControlResult res = solve_steady_control(prob, m_max, tol);
  const double baseline = frobenius_norm(prob.rhs - prob.a * uncontrolled_terminal(prob));
  r.set("iterations", res.iterations);
  r.set("uncontrolled_terminal_residual", baseline);

  std::string csv = "outer_iter,cost,terminal_residual,max_jump\n";
  for (std::size_t m = 0; m < res.cost_history.size(); ++m) {
    csv += std::to_string(m) + "," + fmt(res.cost_history[m]) + "," + fmt(res.residual_history[m]) + "," +
           fmt(res.jump_history[m]) + "\n";
  }
  Artifacts out;
  out.files.emplace_back("errors.csv", csv);
  out.files.emplace_back("config.resolved.txt", r.text());
  out.files.emplace_back("plot.gp",
                         "set title 'virtual control'\nset xlabel 'outer iteration'\nset logscale y\n"
                         "set format y '%.0e'\nset datafile separator ','\n"
                         "plot 'errors.csv' using 1:2 skip 1 with lines title 'J', \\\n"
                         "     'errors.csv' using 1:3 skip 1 with lines title 'terminal residual', \\\n"
                         "     'errors.csv' using 1:4 skip 1 with lines title 'max jump'\n");
  out.summary.push_back(std::to_string(res.iterations) + " steps, terminal residual " + fmt(res.terminal_residual) +
                        " (uncontrolled " + fmt(baseline) + "), max jump " + fmt(res.max_jump));
  return out;
}

}  // namespace detail

/// Runs one experiment; throws ConfigError for invalid configurations and
/// NumericError subclasses for numerical failures.
inline Artifacts run_experiment(const ExperimentConfig& cfg) {
  const std::string& e = cfg.experiment;
  if (e != "custom") {
    detail::reject(cfg.family, "--family", e);
    detail::reject(cfg.function, "--function", e);
  }
  if (e != "control_demo") {
    detail::reject(cfg.alpha, "--alpha", e);
    detail::reject(cfg.epsilon, "--epsilon", e);
    detail::reject(cfg.rho, "--rho", e);
  }
  const bool accel = e.rfind("acc_", 0) == 0;
  if (!accel) {
    detail::reject(cfg.cutoff, "--cutoff", e);
    if (cfg.no_cutoff) throw ConfigError("--no-cutoff does not apply to " + e);
    detail::reject(cfg.stride, "--stride", e);
    if (e != "fig_inverse" && e != "fig_exp" && e != "fig_cos" && e != "custom") detail::reject(cfg.scale_pow, "--scale-pow", e);
  } else {
    detail::reject(cfg.scale_pow, "--scale-pow", e);
    detail::reject(cfg.stop_tol, "--stop-tol", e);
  }
  if (e == "fig_inverse") return detail::fig_inverse(cfg);
  if (e == "fig_exp") return detail::fig_exp(cfg);
  if (e == "fig_cos") return detail::fig_cos(cfg);
  if (e == "acc_grad") return detail::acc_grad(cfg);
  if (e == "acc_sd") return detail::acc_sd(cfg);
  if (e == "acc_inv_approx") return detail::acc_inv(cfg, false);
  if (e == "acc_inv_exact") return detail::acc_inv(cfg, true);
  if (e == "control_demo") return detail::control_demo(cfg);
  if (e == "custom") return detail::custom(cfg);
  std::string names;
  for (const auto& n : experiment_names()) names += (names.empty() ? "" : ", ") + n;
  throw ConfigError("unknown experiment '" + e + "'; valid: " + names);
}

/// Writes every artifact into `dir` (created if needed).  Files are written
/// under temporary names and renamed once all of them are complete.
inline void write_artifacts(const std::filesystem::path& dir, const Artifacts& art) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
  std::vector<std::filesystem::path> tmp;
  for (const auto& [name, content] : art.files) {
    const auto path = dir / (name + ".tmp");
    std::ofstream out(path, std::ios::binary);
    out << content;
    out.close();
    tmp.push_back(path);
    if (!out) {
      for (const auto& t : tmp) std::filesystem::remove(t, ec);
      throw Error("cannot write '" + path.string() + "'");
    }
  }
  for (std::size_t i = 0; i < art.files.size(); ++i) std::filesystem::rename(tmp[i], dir / art.files[i].first);
}

}  // namespace parafun
