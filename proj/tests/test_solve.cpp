#include <sr3/oracle.hpp>
#include <sr3/solve.hpp>

#include <Eigen/QR>
#include <Eigen/SVD>
#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace sr3;
using prox::Regularizer;

namespace {

std::mt19937_64 rng(31);

Matrix randn(Index r, Index c) {
  std::normal_distribution<double> normal;
  return Matrix::NullaryExpr(r, c, [&] { return normal(rng); });
}
Vector randn(Index n) { return randn(n, 1); }

Matrix with_condition(Index m, Index d, double cond) {
  const Matrix U = randn(m, m).householderQr().householderQ();
  const Matrix V = randn(d, d).householderQr().householderQ();
  Vector s(d);
  // Geometric spectrum from cond down to 1.
  for (Index i = 0; i < d; ++i) s[i] = std::pow(cond, 1.0 - static_cast<double>(i) / static_cast<double>(d - 1));
  return U.leftCols(d) * s.asDiagonal() * V.transpose();
}

Matrix diag3(double a, double b, double c) { return Eigen::Vector3d(a, b, c).asDiagonal(); }

SolverOptions tight(int iters = 200000) {
  SolverOptions o;
  o.tol = 1e-13;
  o.max_iters = iters;
  return o;
}

}  // namespace

TEST(Sr3ProxGrad, ZeroLambdaGivesLeastSquares) {
  const Matrix A = randn(10, 5);
  const Vector b = randn(10);
  const auto sys = RelaxedSystem::build(A, b, 1.0);
  const auto rep = sr3_prox_grad(sys, Regularizer::l1(), 0.0, tight());
  const Vector ls = A.colPivHouseholderQr().solve(b);
  EXPECT_TRUE(rep.converged);
  EXPECT_LE((rep.w - ls).norm(), 1e-9);
  EXPECT_LE((rep.x - ls).norm(), 1e-9);
  EXPECT_EQ((rep.w.array().abs() > 0.01).count(), 5);
}

TEST(Sr3ProxGrad, LambdaMaxKeepsZero) {
  const Matrix A = randn(8, 6);
  const auto sys = RelaxedSystem::build(A, randn(8), 2.0);
  const double lmax = sys.lambda_max_l1();
  const auto rep = sr3_prox_grad(sys, Regularizer::l1(), lmax, {});
  EXPECT_EQ(rep.iterations, 1);
  EXPECT_TRUE(rep.converged);
  EXPECT_EQ(rep.w.norm(), 0.0);
  const auto below = sr3_prox_grad(sys, Regularizer::l1(), 0.9 * lmax, {});
  EXPECT_GT(below.w.norm(), 0.0);
}

TEST(Sr3ProxGrad, L0MatchesExhaustiveSupport) {
  const Matrix A = diag3(3, 2, 0.1);
  const Vector b = Eigen::Vector3d(3, 2, 0.001);
  const auto sys = RelaxedSystem::build(A, b, 1.0);
  const auto sr3 = sr3_prox_grad(sys, Regularizer::l0(), 0.1, tight(10000));
  const auto exact = oracle::exhaustive_l0(A, b, 0.1);
  for (Index i = 0; i < 3; ++i) EXPECT_EQ(sr3.w[i] != 0.0, exact.argmin[i] != 0.0) << i;
  EXPECT_NE(sr3.w[0], 0.0);
  EXPECT_NE(sr3.w[1], 0.0);
  EXPECT_EQ(sr3.w[2], 0.0);

  const auto std = std_prox_grad(A, b, Regularizer::l0(), 0.1, tight(10000));
  for (Index i = 0; i < 3; ++i) EXPECT_EQ(std.w[i] != 0.0, sr3.w[i] != 0.0) << i;
  EXPECT_GT(std.iterations, sr3.iterations);
}

TEST(Sr3ProxGrad, FixedPointExitsImmediately) {
  const Matrix A = randn(12, 6);
  const auto sys = RelaxedSystem::build(A, randn(12), 1.0);
  const double lambda = 0.2 * sys.lambda_max_l1();
  const auto solved = sr3_prox_grad(sys, Regularizer::l1(), lambda, tight());
  SolverOptions opts;
  opts.initial = solved.w;
  const auto again = sr3_prox_grad(sys, Regularizer::l1(), lambda, opts);
  EXPECT_EQ(again.iterations, 1);
  EXPECT_LE((again.w - solved.w).norm(), 1e-12);
}

TEST(Sr3ProxGrad, MonotoneLossForConvexRegularizers) {
  for (int seed = 0; seed < 10; ++seed) {
    const Matrix A = randn(20, 15);
    const auto sys = RelaxedSystem::build(A, randn(20), 0.5 + seed);
    const std::vector<Regularizer> regs = {Regularizer::l1(), Regularizer::sq_l2(), Regularizer::nonnegative(),
                                           Regularizer::group_l2(prox::GroupPartition::contiguous(5, 3))};
    for (const auto& reg : regs) {
      const auto rep = sr3_prox_grad(sys, reg, 0.1 * sys.lambda_max_l1(), {});
      for (std::size_t k = 1; k < rep.loss_history.size(); ++k)
        EXPECT_LE(rep.loss_history[k], rep.loss_history[k - 1] * (1 + 1e-14) + 1e-14) << reg.name() << " k=" << k;
    }
  }
}

TEST(Sr3ProxGrad, NonconvexReportsBestIterate) {
  const Matrix A = randn(15, 10);
  const auto sys = RelaxedSystem::build(A, randn(15), 1.0);
  const auto rep = sr3_prox_grad(sys, Regularizer::lp(0.5), 0.3, {});
  double best = rep.loss_history[0];
  for (double l : rep.loss_history) best = std::min(best, l);
  EXPECT_DOUBLE_EQ(rep.final_loss, best);
  EXPECT_NEAR(relaxed_objective(sys, Regularizer::lp(0.5), 0.3, rep.w), best, 1e-12 * (1 + best));
}

TEST(Sr3ProxGrad, OversizedStepIsFlaggedAsDivergent) {
  const Matrix A = randn(10, 10) * 5.0;
  const auto sys = RelaxedSystem::build(A, randn(10), 1.0);
  SolverOptions opts;
  opts.step = 40.0;
  opts.initial = randn(10);
  const auto rep = sr3_prox_grad(sys, Regularizer::l1(), 0.0, opts);
  EXPECT_TRUE(rep.diverged);
  EXPECT_FALSE(rep.converged);
}

TEST(Fista, MomentumSequence) {
  EXPECT_DOUBLE_EQ(fista_next_momentum(1.0), 0.5 * (1.0 + std::sqrt(5.0)));
}

TEST(Fista, FirstIterateMatchesProxGradient) {
  const Matrix A = randn(10, 6);
  const auto sys = RelaxedSystem::build(A, randn(10), 1.0);
  SolverOptions one;
  one.max_iters = 1;
  const double lambda = 0.3 * sys.lambda_max_l1();
  const auto a = sr3_fista(sys, Regularizer::l1(), lambda, one);
  const auto b = sr3_prox_grad(sys, Regularizer::l1(), lambda, one);
  EXPECT_LE((a.w - b.w).norm(), 1e-15);
}

TEST(Fista, FasterOnIllConditionedQuadratic) {
  // Singular values from 1 down to 0.01 leave the relaxed value function ill-conditioned.
  const Matrix A = with_condition(60, 40, 100.0) / 100.0;
  const auto sys = RelaxedSystem::build(A, randn(60), 1.0);
  SolverOptions opts;
  opts.max_iters = 200000;
  const auto plain = sr3_prox_grad(sys, Regularizer::l1(), 0.0, opts);
  const auto fast = sr3_fista(sys, Regularizer::l1(), 0.0, opts);
  EXPECT_TRUE(plain.converged);
  EXPECT_TRUE(fast.converged);
  EXPECT_LT(fast.iterations, plain.iterations);
}

TEST(Fista, RejectsNonconvex) {
  const auto sys = RelaxedSystem::build(randn(4, 3), randn(4), 1.0);
  EXPECT_THROW(sr3_fista(sys, Regularizer::l0(), 0.1, {}), std::invalid_argument);
}

TEST(StdProxGrad, ZeroLambdaLeastSquaresAndIdentityOnly) {
  const Matrix A = randn(10, 4);
  const Vector b = randn(10);
  const auto rep = std_prox_grad(A, b, Regularizer::l1(), 0.0, tight());
  EXPECT_LE((rep.w - A.colPivHouseholderQr().solve(b)).norm(), 1e-9);
  EXPECT_NO_THROW(std_prox_grad(A, IdentityOperator(4), b, Regularizer::l1(), 0.0, {}));
  try {
    (void)std_prox_grad(A, DenseOperator(randn(5, 4)), b, Regularizer::l1(), 0.1, {});
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("sr3_prox_grad"), std::string::npos);
  }
}

TEST(Admm, ZeroLambdaAndAgreementWithProxGradient) {
  const Matrix A = randn(30, 10);
  const Vector b = randn(30);
  const auto ls = admm_lasso(A, b, 0.0, tight());
  EXPECT_LE((ls.w - A.colPivHouseholderQr().solve(b)).norm(), 1e-8);
  for (int t = 0; t < 5; ++t) {
    const Matrix At = randn(30, 10);
    const Vector bt = randn(30);
    const double lambda = 0.2 * (At.transpose() * bt).lpNorm<Eigen::Infinity>();
    const auto a = admm_lasso(At, bt, lambda, tight());
    const auto p = std_prox_grad(At, bt, Regularizer::l1(), lambda, tight());
    EXPECT_LE((a.w - p.w).norm(), 1e-4);
  }
}

TEST(Admm, IterationsGrowFasterWithConditioningThanSr3) {
  std::vector<int> admm, sr3;
  for (double cond : {1.0, 50.0}) {
    const Matrix A = with_condition(60, 40, cond);
    const Vector b = A * randn(40) + 0.1 * randn(60);
    const double lambda = (A.transpose() * b).lpNorm<Eigen::Infinity>() / 5.0;
    admm.push_back(admm_lasso(A, b, lambda, {}).iterations);
    sr3.push_back(sr3_prox_grad(RelaxedSystem::build(A, b, 1.0), Regularizer::l1(), lambda, {}).iterations);
  }
  EXPECT_GT(admm[1] - admm[0], sr3[1] - sr3[0]);
}

TEST(Stationarity, KnownPoints) {
  const Matrix A = randn(8, 3);
  const Vector b = randn(8);
  const Vector ls = A.colPivHouseholderQr().solve(b);
  EXPECT_LE(*stationarity_residual(A, b, Regularizer::l1(), 0.0, ls), 1e-8);

  const Matrix one = Matrix::Constant(1, 1, 1.0);
  const Vector two = Vector::Constant(1, 2.0);
  const Vector xhat = Vector::Constant(1, 1.0);
  EXPECT_NEAR(*stationarity_residual(one, two, Regularizer::l1(), 1.0, xhat), 0.0, 1e-15);
  double previous = 0.0;
  for (double delta : {1e-3, 1e-2, 1e-1, 0.5}) {
    const double r = *stationarity_residual(one, two, Regularizer::l1(), 1.0, xhat + Vector::Constant(1, delta));
    EXPECT_GT(r, previous);
    previous = r;
  }
  const auto sys = RelaxedSystem::build(randn(6, 4), randn(6), 1.0);
  EXPECT_FALSE(stationarity_residual(sys, Regularizer::singular_values(prox::SpectralInner::L1, 2, 2), 1.0,
                                     Vector::Zero(4))
                   .has_value());
}

TEST(Stationarity, SolverOutputsAreStationary) {
  const Matrix A = randn(20, 8);
  const Vector b = randn(20);
  const double lambda = 0.3 * (A.transpose() * b).lpNorm<Eigen::Infinity>();
  const auto sys = RelaxedSystem::build(A, b, 1.0);
  const std::vector<Regularizer> regs = {Regularizer::l1(), Regularizer::l0(), Regularizer::lp(0.5),
                                         Regularizer::cad(1.0), Regularizer::sq_l2(), Regularizer::nonnegative(),
                                         Regularizer::group_l2(prox::GroupPartition::contiguous(4, 2))};
  for (const auto& reg : regs) {
    const auto rep = sr3_prox_grad(sys, reg, reg.name() == "l0" ? 0.05 : lambda, tight());
    const auto r = stationarity_residual(sys, reg, reg.name() == "l0" ? 0.05 : lambda, rep.w);
    ASSERT_TRUE(r.has_value());
    EXPECT_LE(*r, 1e-8) << reg.name();
  }
}

TEST(Stationarity, CertificateIsASubgradient) {
  const Matrix A = randn(15, 10);
  const Vector b = randn(15);
  const double lambda = 0.2 * (A.transpose() * b).lpNorm<Eigen::Infinity>();
  SolverOptions opts;
  opts.record_iterates = true;
  opts.max_iters = 30;
  const auto rep = std_prox_grad(A, b, Regularizer::l1(), lambda, opts);
  const auto grad = [&](const Vector& x) { return Vector(A.transpose() * (A * x - b)); };
  for (std::size_t k = 0; k + 1 < rep.iterates.size(); ++k) {
    const Vector& xk = rep.iterates[k];
    const Vector& xn = rep.iterates[k + 1];
    const Vector v = (xk - xn) / rep.step + grad(xn) - grad(xk);
    EXPECT_NEAR(v.norm(), rep.stationarity_history[k], 1e-10 * (1 + v.norm()));
    // v - grad f(x_{k+1}) must lie in lambda * d|x_{k+1}|_1.
    const Vector s = v - grad(xn);
    for (Index i = 0; i < s.size(); ++i) {
      if (xn[i] != 0.0)
        EXPECT_NEAR(s[i], lambda * (xn[i] > 0 ? 1.0 : -1.0), 1e-8);
      else
        EXPECT_LE(std::abs(s[i]), lambda + 1e-8);
    }
  }
}

TEST(RateCertificates, RandomConvexInstance) {
  const Matrix A = randn(30, 20);
  const Vector b = randn(30);
  const double lambda = 0.1 * (A.transpose() * b).lpNorm<Eigen::Infinity>();
  SolverOptions opts;
  opts.record_iterates = true;
  const auto sys = RelaxedSystem::build(A, b, 1.0);
  const auto rep = sr3_prox_grad(sys, Regularizer::l1(), lambda, opts);
  const auto cert = rate_certificates(rep, sys, Regularizer::l1(), lambda);
  EXPECT_TRUE(cert.sublinear_checked && cert.gap_checked && cert.linear_checked);
  EXPECT_TRUE(cert.ok());
  const auto std = std_prox_grad(A, b, Regularizer::l1(), lambda, opts);
  const auto std_cert = rate_certificates(std, A, b, Regularizer::l1(), lambda);
  EXPECT_TRUE(std_cert.linear_checked);
  EXPECT_TRUE(std_cert.ok());
}

TEST(RateCertificates, OrthogonalDataConvergesInOneStep) {
  const Matrix Q = randn(8, 8).householderQr().householderQ();
  const Vector b = randn(8);
  const double kappa = 1.0;
  const auto sys = RelaxedSystem::build(Q, b, kappa);
  SolverOptions opts;
  opts.step = (1.0 + kappa) / kappa;  // 1 / sigma_max(F)^2
  opts.record_iterates = true;
  const double lambda = 0.3;
  const auto rep = sr3_prox_grad(sys, Regularizer::l1(), lambda, opts);
  EXPECT_LE(rep.iterations, 3);
  const auto ref = sr3_prox_grad(sys, Regularizer::l1(), lambda, tight());
  EXPECT_LE((rep.iterates[1] - ref.w).norm(), 1e-10);
  const auto cert = rate_certificates(rep, sys, Regularizer::l1(), lambda);
  EXPECT_NEAR(cert.contraction, 0.0, 1e-12);
  EXPECT_TRUE(cert.ok());
}

TEST(RateCertificates, NonconvexChecksOnlyAveragedBound) {
  const Matrix A = randn(20, 10);
  const auto sys = RelaxedSystem::build(A, randn(20), 1.0);
  const auto rep = sr3_prox_grad(sys, Regularizer::l0(), 0.1, {});
  const auto cert = rate_certificates(rep, sys, Regularizer::l0(), 0.1);
  EXPECT_TRUE(cert.sublinear_checked);
  EXPECT_FALSE(cert.gap_checked);
  EXPECT_FALSE(cert.linear_checked);
  EXPECT_TRUE(cert.ok());
}

TEST(Comparison, Sr3NeedsNoMoreIterationsThanProxGradient) {
  for (double cond : {10.0, 50.0, 100.0}) {
    const Matrix A = with_condition(60, 40, cond);
    const Vector b = A * randn(40) + 0.1 * randn(60);
    const auto sys = RelaxedSystem::build(A, b, 1.0);
    const double lambda1 = (A.transpose() * b).lpNorm<Eigen::Infinity>() / 5.0;
    const double lambda2 = sys.optimal_ratio().tau * lambda1;
    const auto sr3 = sr3_prox_grad(sys, Regularizer::l1(), lambda2, {});
    const auto pg = std_prox_grad(A, b, Regularizer::l1(), lambda1, {});
    EXPECT_LE(sr3.iterations, pg.iterations) << "cond " << cond;
  }
}
