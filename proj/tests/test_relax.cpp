#include <sr3/oracle.hpp>
#include <sr3/relax.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace sr3;

namespace {

std::mt19937_64 rng(99);

Matrix randn(Index r, Index c) {
  std::normal_distribution<double> normal;
  return Matrix::NullaryExpr(r, c, [&] { return normal(rng); });
}
Vector randn(Index n) { return randn(n, 1); }

Matrix orthonormal_columns(Index n, Index d) {
  const Matrix q = randn(n, n).householderQr().householderQ();
  return q.leftCols(d);
}

Matrix diag2(double a, double b) { return Eigen::Vector2d(a, b).asDiagonal(); }

}  // namespace

TEST(RelaxBuild, FormsH) {
  EXPECT_EQ(RelaxedSystem::build(Matrix::Identity(2, 2), Vector::Zero(2), 1.0).H(), 2.0 * Matrix::Identity(2, 2));
  EXPECT_EQ(RelaxedSystem::build(Matrix::Zero(1, 2), Vector::Zero(1), 1.0).H(), Matrix::Identity(2, 2));
  EXPECT_EQ(RelaxedSystem::build(diag2(2, 1), Vector::Zero(2), 1.0).H(), diag2(5, 2));
}

TEST(RelaxBuild, RejectsBadInput) {
  EXPECT_THROW(RelaxedSystem::build(Matrix::Identity(2, 2), Vector::Zero(2), 0.0), std::invalid_argument);
  EXPECT_THROW(RelaxedSystem::build(Matrix::Identity(2, 2), Vector::Zero(3), 1.0), std::invalid_argument);
  Matrix A(1, 2);
  A << 1, 0;
  Matrix C(1, 2);
  C << 2, 0;
  try {
    (void)RelaxedSystem::build(A, std::make_shared<DenseOperator>(C), Vector::Zero(1), 1.0);
    FAIL() << "singular H accepted";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("pivot"), std::string::npos);
  }
}

TEST(RelaxSolveX, ClosedForm) {
  const auto sys = RelaxedSystem::build(Matrix::Identity(2, 2), Vector::Zero(2), 1.0);
  const Vector x = sys.solve_x(Eigen::Vector2d(1, 1));
  EXPECT_NEAR(x[0], 0.5, 1e-15);
  EXPECT_NEAR(x[1], 0.5, 1e-15);
}

TEST(RelaxSolveX, ConsistentSystemReturnsTruth) {
  const Matrix A = randn(6, 3);
  const Matrix C = randn(4, 3);
  const Vector xbar = randn(3);
  const auto sys = RelaxedSystem::build(A, std::make_shared<DenseOperator>(C), A * xbar, 2.0);
  EXPECT_LE((sys.solve_x(C * xbar) - xbar).norm(), 1e-12);
  EXPECT_LE(sys.solve_residual(randn(4)), 1e-10);
}

TEST(RelaxSolveX, LargeKappaApproachesPseudoInverse) {
  const Matrix A = randn(3, 3);
  const Matrix C = randn(4, 3);
  const Vector w = randn(4);
  const auto sys = RelaxedSystem::build(A, std::make_shared<DenseOperator>(C), randn(3), 1e8);
  const Vector pinv = C.colPivHouseholderQr().solve(w);
  EXPECT_LE((sys.solve_x(w) - pinv).norm(), 1e-6 * (1.0 + pinv.norm()));
}

TEST(RelaxValueGrad, TrivialAndStationary) {
  const Matrix A = randn(5, 4);
  const auto zero = RelaxedSystem::build(A, Vector::Zero(5), 1.0).value_grad(Vector::Zero(4));
  EXPECT_EQ(zero.value, 0.0);
  EXPECT_EQ(zero.grad.norm(), 0.0);

  const Vector b = randn(5);
  const auto sys = RelaxedSystem::build(A, b, 0.7);
  const Vector ls = A.colPivHouseholderQr().solve(b);
  EXPECT_LE(sys.value_grad(ls).grad.norm(), 1e-10);
}

TEST(RelaxValueGrad, MatchesFiniteDifferences) {
  for (int t = 0; t < 20; ++t) {
    const Matrix A = randn(5, 4);
    const Matrix C = randn(6, 4);
    const auto sys = RelaxedSystem::build(A, std::make_shared<DenseOperator>(C), randn(5), 0.5 + t * 0.1);
    const Vector w = randn(6);
    const Vector fd = oracle::fd_gradient([&](const Vector& v) { return sys.value_grad(v).value; }, w);
    const Vector g = sys.value_grad(w).grad;
    EXPECT_LE((fd - g).norm(), 1e-6 * std::max(1.0, g.norm())) << "trial " << t;
  }
}

TEST(RelaxExplicit, ValueMatchesAndGradientAgrees) {
  const Matrix A = randn(7, 4);
  const Matrix C = randn(5, 4);
  const auto sys = RelaxedSystem::build(A, std::make_shared<DenseOperator>(C), randn(7), 1.3);
  const auto [F, g] = sys.form_F_explicit();
  for (int t = 0; t < 2; ++t) {
    const Vector w = randn(5);
    const auto vg = sys.value_grad(w);
    EXPECT_NEAR(0.5 * (F * w - g).squaredNorm(), vg.value, 1e-10 * (1.0 + vg.value));
    EXPECT_LE((F.transpose() * (F * w - g) - vg.grad).norm(), 1e-10 * (1.0 + vg.grad.norm()));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(F.transpose() * F);
  EXPECT_LE(eig.eigenvalues().maxCoeff(), 1.3 + 1e-10);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10);
}

TEST(RelaxExplicit, DiagonalExample) {
  const auto sys = RelaxedSystem::build(diag2(2, 1), Vector::Zero(2), 1.0);
  const Matrix FtF = [&] {
    const auto e = sys.form_F_explicit();
    return Matrix(e.F.transpose() * e.F);
  }();
  EXPECT_LE((FtF - diag2(0.8, 0.5)).norm(), 1e-14);
}

TEST(RelaxExplicit, TightFrameHasSqrtKappaSingularValues) {
  const Index n = 9, d = 5;
  const double kappa = 2.5;
  const auto sys = RelaxedSystem::build(randn(4, d), std::make_shared<DenseOperator>(orthonormal_columns(n, d)),
                                        randn(4), kappa);
  const Vector s = Eigen::BDCSVD<Matrix>(sys.form_F_explicit().F).singularValues();
  int at_root = 0;
  for (Index i = 0; i < s.size(); ++i) at_root += std::abs(s[i] - std::sqrt(kappa)) <= 1e-9;
  EXPECT_EQ(at_root, n - d);
  const auto rep = sys.spectral_report();
  EXPECT_EQ(rep.structure, "tight_frame");
  EXPECT_LE(rep.max_relative_deviation, 1e-8);
}

TEST(RelaxExplicit, SizeGuard) {
  const auto sys = RelaxedSystem::build(Matrix::Identity(3200, 3200), Vector::Zero(3200), 1.0);
  EXPECT_THROW(sys.form_F_explicit(), std::invalid_argument);
}

TEST(RelaxSpectral, DiagonalConditionNumber) {
  const auto rep = RelaxedSystem::build(diag2(2, 1), Vector::Zero(2), 1.0).spectral_report();
  EXPECT_NEAR(rep.cond_F, std::sqrt(1.6), 1e-12);
  EXPECT_NEAR(rep.predicted_cond_F, 2.0 * std::sqrt(2.0 / 5.0), 1e-12);
  EXPECT_NEAR(rep.cond_F, rep.predicted_cond_F, 1e-12);
  EXPECT_EQ(rep.structure, "identity");
}

TEST(RelaxSpectral, KappaChoiceBoundsCondition) {
  const Matrix A = randn(8, 5);
  const Vector s = Eigen::JacobiSVD<Matrix>(A).singularValues();
  for (double mu : {0.5, 1.0, 3.0}) {
    const double kappa = (s[0] * s[0] - s[4] * s[4]) / (mu * mu);
    const auto rep = RelaxedSystem::build(A, Vector::Zero(8), kappa).spectral_report();
    EXPECT_LE(rep.cond_F, 1.0 + rep.cond_A / mu);
  }
}

TEST(RelaxSpectral, OrthogonalAHasUnitCondition) {
  const Matrix Q = orthonormal_columns(6, 6);
  const auto rep = RelaxedSystem::build(Q, Vector::Zero(6), 3.0).spectral_report();
  EXPECT_NEAR(rep.cond_F, 1.0, 1e-12);
  for (Index i = 0; i < 6; ++i) EXPECT_NEAR(rep.singular_values[i] * rep.singular_values[i], 1.0 / (1.0 + 1.0 / 3.0), 1e-12);
}

TEST(RelaxSpectral, RandomIdentityInstancesMatchClosedForm) {
  std::uniform_real_distribution<double> kappas(0.1, 10.0);
  for (int t = 0; t < 50; ++t) {
    const auto rep = RelaxedSystem::build(randn(12, 8), Vector::Zero(12), kappas(rng)).spectral_report();
    EXPECT_LE(rep.max_relative_deviation, 1e-8);
    EXPECT_NEAR(rep.cond_F, rep.predicted_cond_F, 1e-8 * rep.predicted_cond_F);
  }
}

TEST(RelaxSpectral, GeneralSandwich) {
  for (int t = 0; t < 10; ++t) {
    const double kappa = 0.5 + t;
    const auto sys = RelaxedSystem::build(randn(10, 5), std::make_shared<DenseOperator>(randn(7, 5)),
                                          Vector::Zero(10), kappa);
    const auto rep = sys.spectral_report();
    EXPECT_EQ(rep.structure, "general");
    const double top = rep.singular_values[0], bottom = rep.singular_values[rep.singular_values.size() - 1];
    EXPECT_LE(top * top, kappa + 1e-10);
    EXPECT_GE(bottom * bottom, rep.lower_bound * (1 - 1e-10));
  }
}

TEST(RelaxSpectral, ZeroLambdaSolutionsAgree) {
  const Matrix A = randn(9, 4);
  const Vector b = randn(9);
  const auto sys = RelaxedSystem::build(A, b, 1.0);
  const auto [F, g] = sys.form_F_explicit();
  const Vector w = F.colPivHouseholderQr().solve(g);
  EXPECT_LE((A.transpose() * (A * w - b)).norm(), 1e-8);
}

TEST(RelaxOptimalRatio, Values) {
  const auto r = RelaxedSystem::build(diag2(2, 1), Vector::Zero(2), 1.0).optimal_ratio();
  EXPECT_NEAR(r.tau, 0.35, 1e-15);
  EXPECT_NEAR(r.coefficient, 3.0 / 7.0, 1e-15);
  EXPECT_NEAR(RelaxedSystem::build(orthonormal_columns(4, 4), Vector::Zero(4), 1.0).optimal_ratio().coefficient, 0.0,
              1e-14);
  const Matrix A = randn(6, 4);
  double previous = 1.0;
  for (double kappa : {1.0, 10.0, 100.0}) {
    const double c = RelaxedSystem::build(A, Vector::Zero(6), kappa).optimal_ratio().coefficient;
    EXPECT_LT(c, previous);
    previous = c;
  }
  const auto general = RelaxedSystem::build(A, std::make_shared<DenseOperator>(randn(5, 4)), Vector::Zero(6), 1.0);
  EXPECT_THROW(general.optimal_ratio(), std::invalid_argument);
}

TEST(MaskedCompletion, ClosedFormAndGradient) {
  Eigen::ArrayXd mask(6);
  mask << 1, 0, 1, 1, 0, 1;
  const Vector data = randn(6);
  const MaskedCompletionSystem sys(mask, data, 0.5);
  const Vector w = randn(6);
  const Vector x = sys.solve_x(w);
  EXPECT_NEAR(x[0], (data[0] + 0.5 * w[0]) / 1.5, 1e-15);
  EXPECT_NEAR(x[1], w[1], 1e-15);
  const Vector fd = oracle::fd_gradient([&](const Vector& v) { return sys.value_grad(v).value; }, w);
  EXPECT_LE((fd - sys.value_grad(w).grad).norm(), 1e-6);
  EXPECT_THROW(MaskedCompletionSystem(Eigen::ArrayXd::Zero(3), Vector::Zero(3), 1.0), std::invalid_argument);
}
