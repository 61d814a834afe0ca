#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "parafun/experiments.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kNumericError = 3;

std::string default_out_dir(const std::string& experiment) {
  const char* env = std::getenv("PARAFUN_OUT");
  std::string base = env && *env ? env : "out";
  return base + "/" + experiment;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"parafun: parareal matrix-function and steady-state experiments"};
  app.require_subcommand(1);

  parafun::ExperimentConfig cfg;
  std::string out_dir;
  auto* run = app.add_subcommand("run", "run one experiment");
  std::string names;
  for (const auto& n : parafun::experiment_names()) names += (names.empty() ? "" : ", ") + n;
  run->add_option("experiment", cfg.experiment, "one of: " + names)->required();
  run->add_option("--n", cfg.n, "matrix size (points per direction for 2D problems)");
  run->add_option("--N", cfg.n_coarse, "coarse intervals");
  run->add_option("--J", cfg.n_fine, "fine steps per coarse interval");
  run->add_option("--dt", cfg.dt, "pseudo-time step (acceleration experiments)");
  run->add_option("--scale-pow", cfg.scale_pow, "power-of-two scaling exponent m");
  run->add_option("--scheme", cfg.scheme, "euler or cn");
  run->add_option("--method", cfg.method, "classical, modified or sequential");
  run->add_option("--function", cfg.function, "custom: inverse, exp, cos or sin");
  run->add_option("--family", cfg.family, "custom: laplacian_1d, laplacian_2d or spd_random_shifted");
  run->add_option("--matrix", cfg.matrix_path, "custom: Matrix Market input");
  run->add_option("--stop-tol", cfg.stop_tol, "stopping tolerance");
  run->add_option("--k-max", cfg.k_max, "maximum iterations / steps");
  run->add_option("--cutoff", cfg.cutoff, "accelerator cutoff time (default 1)");
  run->add_flag("--no-cutoff", cfg.no_cutoff, "keep the accelerator active for all steps");
  run->add_option("--alpha", cfg.alpha, "control: terminal residual weight");
  run->add_option("--epsilon", cfg.epsilon, "control: jump penalty");
  run->add_option("--rho", cfg.rho, "control: initial descent step");
  run->add_option("--stride", cfg.stride, "acceleration: write every k-th step");
  run->add_option("--workers", cfg.workers, "worker threads (0 = all cores)");
  run->add_option("--out", out_dir, "output directory (default $PARAFUN_OUT/<experiment> or out/<experiment>)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  if (out_dir.empty()) out_dir = default_out_dir(cfg.experiment);

  const auto start = std::chrono::steady_clock::now();
  try {
    const parafun::Artifacts art = parafun::run_experiment(cfg);
    parafun::write_artifacts(out_dir, art);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (const auto& line : art.summary) std::cout << cfg.experiment << ": " << line << '\n';
    std::printf("%s: wrote %zu files to %s in %.2f s\n", cfg.experiment.c_str(), art.files.size(), out_dir.c_str(),
                secs);
    return kOk;
  } catch (const parafun::NumericError& e) {
    std::cerr << "parafun: numeric failure: " << e.what() << '\n';
    return kNumericError;
  } catch (const parafun::Error& e) {
    std::cerr << "parafun: " << e.what() << '\n';
    return kConfigError;
  }
}
