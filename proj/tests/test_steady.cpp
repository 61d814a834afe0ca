#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "parafun/reference.hpp"
#include "parafun/steady.hpp"
#include "support.hpp"

using parafun::AccelOptions;
using parafun::DenseMatrix;
using testsupport::max_diff;
using testsupport::scalar;

namespace {

struct Heat {
  DenseMatrix a, b, x0, x_tilde;
};

Heat heat(std::size_t n) {
  Heat s;
  s.a = parafun::generate({parafun::ProblemFamily::laplacian_1d, n, parafun::Scaling::mesh()});
  s.b = DenseMatrix(n, 1, 1.0);
  s.x0 = DenseMatrix(n, 1);
  s.x_tilde = parafun::approx_inverse(s.a, parafun::ApproxInverseMethod::ilu0(), s.b);
  return s;
}

// A-norm of the error, squared
double energy(const DenseMatrix& a, const DenseMatrix& e) { return parafun::frobenius_inner(a * e, e); }

}  // namespace

TEST(Accelerator, InitAndStep) {
  EXPECT_EQ(parafun::accelerator_init(DenseMatrix{{3}, {1}}, DenseMatrix{{1}, {1}}), (DenseMatrix{{2}, {0}}));
  EXPECT_EQ(parafun::accelerator_step(DenseMatrix{{1}, {1}}, DenseMatrix::diagonal({2, 4}), 0.25),
            (DenseMatrix{{0.5}, {0}}));
  EXPECT_THROW(parafun::accelerator_step(DenseMatrix(3, 1), DenseMatrix::identity(2), 0.1), parafun::DimensionError);
  EXPECT_THROW(parafun::accelerator_init(DenseMatrix(3, 1), DenseMatrix(2, 1)), parafun::DimensionError);
}

TEST(SimpleGradient, ScalarClosedForm) {
  // a = 1, b = 2, X* = 2, x0 = 0, x_tilde = X*: E^k = (1-dt)^{k-1} (1 - dt - k dt) e
  const double dt = 0.05, e = 2.0;
  const auto res = parafun::simple_gradient_accelerated(scalar(1), scalar(2), scalar(0), scalar(2), dt, 40);
  ASSERT_EQ(res.residuals.size(), 41u);
  for (std::size_t k = 1; k <= 40; ++k) {
    const double expected = std::pow(1 - dt, k - 1.0) * (1 - dt - k * dt) * e;
    EXPECT_NEAR(res.residuals[k], std::abs(expected), 1e-12) << k;
    EXPECT_NEAR(res.plain_residuals[k], std::pow(1 - dt, k) * e, 1e-12) << k;
    EXPECT_NEAR(res.hist.ratio[k], std::abs(1 - (k + 1) * dt) / (1 - dt), 1e-10) << k;
  }
  EXPECT_NEAR(res.hist.times[10], 0.5, 1e-15);
  EXPECT_EQ(res.hist.ratio[0], 1.0);
  EXPECT_EQ(res.iterations, 40u);
}

TEST(SimpleGradient, DiagonalClosedForm) {
  const std::vector<double> lam{1.0, 4.0, 9.0};
  const double dt = 0.02;
  const auto a = DenseMatrix::diagonal(lam);
  const DenseMatrix b{{1}, {-2}, {3}};
  const auto xstar = parafun::reference_inverse(a) * b;
  const auto res = parafun::simple_gradient_accelerated(a, b, DenseMatrix(3, 1), xstar, dt, 25);
  DenseMatrix err(3, 1);
  const std::size_t k = 25;
  for (std::size_t i = 0; i < 3; ++i) {
    const double g = 1 - dt * lam[i];
    err(i, 0) = std::pow(g, k - 1.0) * (g - k * dt) * xstar(i, 0);
  }
  EXPECT_LE(max_diff(xstar - res.x, err), 1e-12);
}

TEST(SimpleGradient, TwinIsBitwisePlainWhenAcceleratorVanishes) {
  std::mt19937_64 rng(1);
  const auto a = testsupport::random_spd(5, rng);
  const auto b = testsupport::random_matrix(5, 2, rng), x0 = testsupport::random_matrix(5, 2, rng);
  const auto res = parafun::simple_gradient_accelerated(a, b, x0, x0, 0.1, 30);
  EXPECT_EQ(res.x, res.x_plain);
  for (double r : res.hist.ratio) EXPECT_EQ(r, 1.0);
}

TEST(SimpleGradient, CutoffRestoresPlainRecurrence) {
  const auto res =
      parafun::simple_gradient_accelerated(scalar(1), scalar(2), scalar(0), scalar(1.5), 0.1, 30, AccelOptions{0.45});
  const auto free = parafun::simple_gradient_accelerated(scalar(1), scalar(2), scalar(0), scalar(1.5), 0.1, 30);
  EXPECT_NE(res.x, free.x);
  // after the cutoff E^{k+1} = (1 - dt) E^k
  for (std::size_t k = 5; k < 30; ++k) {
    EXPECT_NEAR(res.residuals[k + 1], 0.9 * res.residuals[k], 1e-12) << k;
  }
}

TEST(SimpleGradient, Rejects) {
  EXPECT_THROW(parafun::simple_gradient_accelerated(scalar(1), scalar(1), scalar(0), scalar(0), 0.0, 1),
               parafun::InvalidArgument);
  EXPECT_THROW(parafun::simple_gradient_accelerated(DenseMatrix(2, 3), DenseMatrix(2, 1), DenseMatrix(3, 1),
                                                    DenseMatrix(3, 1), 0.1, 1),
               parafun::DimensionError);
}

TEST(SimpleGradient, DivergenceDetected) {
  // dt > 2 / lambda: |1 - dt a| > 1
  AccelOptions opt;
  opt.divergence_bound = 1e6;
  EXPECT_THROW(parafun::simple_gradient_accelerated(scalar(10), scalar(1), scalar(0), scalar(0), 1.0, 100, opt),
               parafun::DivergenceError);
}

TEST(InverseAccelerated, IdentityFromIdentity) {
  const auto id = DenseMatrix::identity(3);
  const auto res = parafun::inverse_accelerated(id, id, id, 0.5, 5);
  EXPECT_EQ(res.x, id);
  EXPECT_EQ(res.residuals.back(), 0.0);
  EXPECT_EQ(res.hist.ratio.back(), 1.0);
}

TEST(InverseAccelerated, ExactGuessBeatsPlain) {
  const auto a = parafun::generate({parafun::ProblemFamily::laplacian_2d, 4, parafun::Scaling::frobenius()});
  const auto x0 = DenseMatrix(16, 16), exact = parafun::reference_inverse(a);
  const auto res = parafun::inverse_accelerated(a, x0, exact, 0.1, 200, AccelOptions{1.0});
  EXPECT_LT(res.hist.ratio.back(), 0.2);
  // without the cutoff the accelerator overshoots the slow modes: E^k = G^{k-1} (G - k dt) e
  const auto free = parafun::inverse_accelerated(a, x0, exact, 0.1, 200);
  EXPECT_GT(free.hist.ratio.back(), 1.0);
  EXPECT_EQ(res.dt_history.size(), 200u);
}

TEST(SteepestDescent, FirstStepLength) {
  const auto a = DenseMatrix::diagonal({1, 3});
  const DenseMatrix b{{1}, {1}};
  const auto res = parafun::steepest_descent_accelerated(a, b, DenseMatrix(2, 1), DenseMatrix(2, 1), 1);
  ASSERT_EQ(res.dt_history.size(), 1u);
  EXPECT_EQ(res.dt_history[0], 0.5);
  EXPECT_EQ(res.x, (DenseMatrix{{0.5}, {0.5}}));
  EXPECT_EQ(res.hist.times[1], 1.0);
}

TEST(SteepestDescent, KantorovichRate) {
  // kappa = 9: ||e_{k+1}||_A^2 <= ((9 - 1) / (9 + 1))^2 ||e_k||_A^2
  const auto a = DenseMatrix::diagonal({1, 9});
  const DenseMatrix b{{1}, {1}};
  const auto xstar = parafun::reference_inverse(a) * b;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x0 = testsupport::random_matrix(2, 1, rng);
    double prev = energy(a, xstar - x0);
    for (std::size_t k = 1; k <= 10; ++k) {
      const auto res = parafun::steepest_descent_accelerated(a, b, x0, x0, k);
      if (res.iterations < k) break;
      const double cur = energy(a, xstar - res.x_plain);
      EXPECT_LE(cur, 0.64 * prev * (1 + 1e-9) + 1e-28);
      prev = cur;
    }
  }
  // worst case start attains the rate
  const DenseMatrix x0 = xstar - DenseMatrix{{1.0}, {1.0 / 9.0}};
  const auto one = parafun::steepest_descent_accelerated(a, b, x0, x0, 1);
  EXPECT_NEAR(energy(a, xstar - one.x) / energy(a, xstar - x0), 0.64, 1e-12);
}

TEST(SteepestDescent, RecurrenceResidualDoesNotDrift) {
  const auto s = heat(63);
  const auto res = parafun::steepest_descent_accelerated(s.a, s.b, s.x0, s.x_tilde, 200);
  EXPECT_LE(res.max_drift, 1e-10);
}

TEST(SteepestDescent, HeatAccelerationBelowPlain) {
  const auto s = heat(63);
  const auto res = parafun::steepest_descent_accelerated(s.a, s.b, s.x0, s.x_tilde, 100);
  // steps of order h^2 leave the first step almost unaccelerated
  EXPECT_NEAR(res.hist.ratio[1], 1.0, 1e-4);
  for (std::size_t k = 2; k < res.hist.ratio.size(); ++k) EXPECT_LT(res.hist.ratio[k], 1.0) << k;
  EXPECT_LT(res.hist.ratio.back(), res.hist.ratio[2]);
}

TEST(SteepestDescent, NotSpdThrows) {
  EXPECT_THROW(parafun::steepest_descent_accelerated(scalar(-1), scalar(1), scalar(0), scalar(0), 3),
               parafun::NotSpdError);
}

TEST(SteepestDescent, StopsOnZeroResidual) {
  const auto res = parafun::steepest_descent_accelerated(scalar(2), scalar(4), scalar(2), scalar(2), 10);
  EXPECT_EQ(res.iterations, 0u);
  EXPECT_EQ(res.residuals.size(), 1u);
}

namespace {

// Textbook conjugate gradients on each column, for one column right-hand sides.
std::vector<DenseMatrix> textbook_cg(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& x0, std::size_t k) {
  const std::size_t n = a.rows();
  std::vector<double> x(n), r(n), p(n), ap(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = x0(i, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b(i, 0);
    for (std::size_t j = 0; j < n; ++j) s -= a(i, j) * x[j];
    r[i] = p[i] = s;
  }
  auto to_matrix = [&] {
    DenseMatrix m(n, 1);
    for (std::size_t i = 0; i < n; ++i) m(i, 0) = x[i];
    return m;
  };
  std::vector<DenseMatrix> out{to_matrix()};
  for (std::size_t it = 0; it < k; ++it) {
    double rr = 0, pap = 0;
    for (std::size_t i = 0; i < n; ++i) {
      ap[i] = 0;
      for (std::size_t j = 0; j < n; ++j) ap[i] += a(i, j) * p[j];
      rr += r[i] * r[i];
      pap += p[i] * ap[i];
    }
    const double alpha = rr / pap;
    double rr_new = 0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
      rr_new += r[i] * r[i];
    }
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + rr_new / rr * p[i];
    out.push_back(to_matrix());
  }
  return out;
}

}  // namespace

TEST(CgAccelerated, IdentityInOneIteration) {
  const DenseMatrix b{{1}, {2}, {3}};
  const auto res = parafun::cg_accelerated(DenseMatrix::identity(3), b, DenseMatrix(3, 1), 10, 1e-14);
  EXPECT_EQ(res.iterations, 1u);
  EXPECT_TRUE(res.converged);
  EXPECT_EQ(res.x, b);
}

TEST(CgAccelerated, MatchesTextbookCg) {
  std::mt19937_64 rng(8);
  const auto a = testsupport::random_spd(30, rng);
  const auto b = testsupport::random_matrix(30, 1, rng);
  const auto res = parafun::cg_accelerated(a, b, DenseMatrix(30, 1), 15, 0.0);
  const auto ref = textbook_cg(a, b, DenseMatrix(30, 1), 15);
  ASSERT_EQ(res.iterates.size(), ref.size());
  for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_LE(max_diff(res.iterates[k], ref[k]), 1e-8) << k;
}

TEST(CgAccelerated, FiniteTermination) {
  const auto a = DenseMatrix::diagonal({1, 2, 3, 4, 5});
  const DenseMatrix b(5, 1, 1.0);
  const auto res = parafun::cg_accelerated(a, b, DenseMatrix(5, 1), 50, 1e-10);
  EXPECT_TRUE(res.converged);
  EXPECT_LE(res.iterations, 5u);
  EXPECT_LE(max_diff(res.x, parafun::reference_inverse(a) * b), 1e-9);
}

TEST(CgAccelerated, NotSpdThrows) {
  EXPECT_THROW(parafun::cg_accelerated(DenseMatrix::diagonal({1, -1}), DenseMatrix{{1}, {1}}, DenseMatrix(2, 1), 5, 0),
               parafun::NotSpdError);
}
