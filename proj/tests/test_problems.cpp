#include <sr3/problems.hpp>
#include <sr3/solve.hpp>

#include <Eigen/SVD>
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

using namespace sr3;
using namespace sr3::problems;

namespace {

double relative(const Vector& a, const Vector& b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST(Rng, MixingIsDeterministicAndStreamsDiffer) {
  EXPECT_EQ(mix_seed(7, 1), mix_seed(7, 1));
  EXPECT_NE(mix_seed(7, 1), mix_seed(7, 2));
  EXPECT_NE(mix_seed(7, 1), mix_seed(8, 1));
  EXPECT_EQ(stream_id("lasso_path"), stream_id("lasso_path"));
  EXPECT_NE(stream_id("lasso_path"), stream_id("noise_f1"));
  Rng a(3, 1), b(3, 1);
  EXPECT_EQ(a.normal(5), b.normal(5));
}

TEST(Rng, SampleAndOrthogonal) {
  Rng rng(1, 1);
  const auto s = rng.sample(10, 4);
  ASSERT_EQ(s.size(), 4u);
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LT(s[i - 1], s[i]);
  const Matrix q = rng.orthogonal(6);
  EXPECT_LE((q.transpose() * q - Matrix::Identity(6, 6)).norm(), 1e-12);
}

TEST(MakeLasso, DeterministicAndNoiseFree) {
  const auto a = make_lasso(30, 20, 4, 0.5, 11);
  const auto b = make_lasso(30, 20, 4, 0.5, 11);
  EXPECT_EQ(a.dense_A(), b.dense_A());
  EXPECT_EQ(a.b, b.b);
  const auto clean = make_lasso(30, 20, 4, 0.0, 11);
  EXPECT_EQ(clean.dense_A(), a.dense_A());
  EXPECT_EQ(clean.truth->x, a.truth->x);
  EXPECT_EQ(clean.b, clean.dense_A() * clean.truth->x);
  EXPECT_EQ(a.truth->support.size(), 4u);
  EXPECT_LE((a.b - a.dense_A() * a.truth->x - a.truth->noise).norm(), 1e-12);
}

TEST(MakeLasso, FixedSupportLayout) {
  const auto p = make_lasso(60, 50, 10, 1.0, 2, {}, {.random_positions = false, .magnitude = 4.0, .random_signs = false});
  for (Index i = 0; i < 50; ++i) EXPECT_EQ(p.truth->x[i], i < 10 ? 4.0 : 0.0);
}

TEST(MakeLasso, MatrixKinds) {
  const auto u = make_lasso(20, 10, 2, 0.0, 5, {.kind = MatrixKind::Uniform});
  const Matrix Au = u.dense_A();
  EXPECT_GE(Au.minCoeff(), 0.0);
  EXPECT_LE(Au.maxCoeff(), 1.0);
  for (double cond : {1.0, 50.0}) {
    const auto c = make_lasso(40, 30, 3, 0.1, 5, {.kind = MatrixKind::Conditioned, .cond = cond});
    const Vector s = Eigen::JacobiSVD<Matrix>(c.dense_A()).singularValues();
    EXPECT_NEAR(s[0], cond, 1e-10 * cond);
    EXPECT_NEAR(s[s.size() - 1], 1.0, 1e-10);
  }
  EXPECT_THROW(make_lasso(10, 5, 6, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(make_lasso(10, 5, 1, 0.0, 1, {.kind = MatrixKind::Conditioned, .cond = 0.5}), std::invalid_argument);
}

TEST(TightFrame, FrameAndSpectrum) {
  const auto pair = make_tight_frame_problem(40, 20, 10, 3, 0.1, 4);
  const Matrix C = pair.analysis.C->dense();
  EXPECT_EQ(C.rows(), 40);
  EXPECT_EQ(C.cols(), 20);
  EXPECT_LE((C.transpose() * C - Matrix::Identity(20, 20)).norm(), 1e-12);
  EXPECT_LE(relative(pair.analysis.truth->x, C.transpose() * pair.xi_true), 1e-15);
  EXPECT_LE((pair.synthesis.dense_A() - pair.analysis.dense_A() * C.transpose()).norm(), 1e-12);
  EXPECT_EQ(pair.synthesis.b, pair.analysis.b);
  for (Index i = 0; i < 40; ++i) EXPECT_TRUE(pair.xi_true[i] == 0.0 || std::abs(pair.xi_true[i]) == 1.0);

  const auto report = relaxed_system(pair.analysis).spectral_report();
  EXPECT_EQ(report.structure, "tight_frame");
  const double root = std::sqrt(pair.analysis.kappa);
  Index at_root = 0;
  for (Index i = 0; i < report.singular_values.size(); ++i)
    if (std::abs(report.singular_values[i] - root) <= 1e-9) ++at_root;
  EXPECT_EQ(at_root, 40 - 20);
  EXPECT_THROW(make_tight_frame_problem(10, 20, 5, 1, 0.0, 1), std::invalid_argument);
}

TEST(Tv1d, StepSignalStructure) {
  const auto p = make_tv1d(100, 30, 4, 1.0, 8);
  const Vector jumps = p.C->apply(p.truth->x);
  EXPECT_EQ(jumps.size(), 99);
  Index nonzero = 0;
  for (Index i = 0; i < jumps.size(); ++i)
    if (jumps[i] != 0.0) {
      ++nonzero;
      EXPECT_GE(std::abs(jumps[i]), 0.5);
    }
  EXPECT_EQ(nonzero, 4);
  EXPECT_LE(p.truth->x.cwiseAbs().maxCoeff(), 2.0);
  const auto flat = make_tv1d(50, 10, 0, 0.0, 8);
  EXPECT_EQ(flat.C->apply(flat.truth->x).norm(), 0.0);
  EXPECT_THROW(make_tv1d(10, 5, 10, 0.0, 1), std::invalid_argument);
}

TEST(Tv1d, SegmentRegroupingTakesMeans) {
  auto p = make_tv1d(6, 4, 1, 0.0, 1);
  const Vector x = (Vector(6) << 1, 2, 3, 10, 11, 12).finished();
  const Vector w = (Vector(5) << 0, 0, 5, 0, 0).finished();
  p.truth->x = (Vector(6) << 2, 2, 2, 11, 11, 11).finished();
  const auto r = regroup_refit(p, w, x);
  ASSERT_EQ(r.clusters.size(), 2u);
  EXPECT_EQ(r.clusters[0], (std::vector<Index>{0, 1, 2}));
  EXPECT_EQ(r.x_refit, p.truth->x);
  EXPECT_EQ(*r.rel_error, 0.0);
}

TEST(Tv2d, PhantomAndDeconvolution) {
  const Matrix X = make_phantom(32, 32);
  EXPECT_GE(X.minCoeff(), 0.0);
  EXPECT_LE(X.maxCoeff(), 1.0);
  const auto p = make_tv2d_deblur(X, 2.0, 4, 0.0, 1);
  const Vector x = Eigen::Map<const Vector>(X.data(), X.size());
  const ConvolutionTvSystem sys(p);
  EXPECT_LE(relative(sys.deconvolve(), x), 1e-8);
  EXPECT_THROW(make_tv2d_deblur(Matrix::Ones(6, 6), 2.0, 4, 0.0, 1), std::invalid_argument);
}

TEST(Tv2d, GroupValueIsIsotropicTv) {
  const Matrix X = make_phantom(16, 12) + 0.01 * Matrix::Random(16, 12);
  const auto p = make_tv2d_deblur(X, 1.0, 2, 0.0, 1);
  const Vector w = p.C->apply(p.truth->x);
  double direct = 0.0;
  for (Index j = 0; j < 12; ++j)
    for (Index i = 0; i < 16; ++i) {
      const double dx = X((i + 1) % 16, j) - X(i, j), dy = X(i, (j + 1) % 12) - X(i, j);
      direct += std::sqrt(dx * dx + dy * dy);
    }
  EXPECT_NEAR(p.reg.value(w), direct, 1e-12 * direct);
}

TEST(Tv2d, SpectralSolveMatchesDenseSystem) {
  const Matrix X = make_phantom(12, 10);
  const auto p = make_tv2d_deblur(X, 1.5, 3, 0.1, 2);
  const ConvolutionTvSystem fast(p);
  const auto dense = relaxed_system(p);
  Rng rng(5, 9);
  for (int t = 0; t < 3; ++t) {
    const Vector w = rng.normal(240);
    EXPECT_LE(relative(fast.solve_x(w), dense.solve_x(w)), 1e-10);
    const auto a = fast.value_grad(w), b = dense.value_grad(w);
    EXPECT_NEAR(a.value, b.value, 1e-10 * b.value);
    EXPECT_LE(relative(a.grad, b.grad), 1e-10);
  }
}

TEST(TvSpectrum, MatchesExplicitF) {
  const auto p = make_tv2d_deblur(make_phantom(8, 8), 1.0, 3, 0.0, 1);
  const auto spec = tv_spectrum(p);
  const Vector explicit_sv = relaxed_system(p).spectral_report().singular_values;
  ASSERT_EQ(explicit_sv.size(), 128);
  EXPECT_LE((spec.singular_values - explicit_sv).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(TvSpectrum, BlockEigenvalues) {
  const auto p = make_tv2d_deblur(make_phantom(16, 16), 2.0, 4, 0.0, 1);
  const auto spec = tv_spectrum(p);
  const double kappa = p.kappa;
  for (Index k = 0; k < 256; ++k) {
    EXPECT_NEAR(spec.eig_max[k], kappa, 1e-14);
    EXPECT_NEAR(spec.eig_min[k], kappa * std::norm(spec.c_hat[static_cast<std::size_t>(k)]) / spec.h_hat[k], 1e-12);
  }
  // Zero frequency: both difference symbols vanish, so both eigenvalues are kappa.
  EXPECT_EQ(std::abs(spec.dx_hat[0]), 0.0);
  EXPECT_NEAR(spec.eig_min[0], kappa, 1e-14);
  EXPECT_LE(spec.singular_values.maxCoeff(), std::sqrt(kappa) + 1e-14);
  EXPECT_GE(spec.singular_values.minCoeff(), 0.0);
  // One sqrt(kappa) per frequency plus the second one at the zero frequency.
  EXPECT_EQ(spec.count_at_sqrt_kappa(1e-10), 256 + 1);
}

TEST(Completion, Construction) {
  const auto full = make_completion(20, 15, 3, 1.0, 0.0, 4);
  EXPECT_EQ(full.b, full.truth->x);
  const Matrix X = Eigen::Map<const Matrix>(full.truth->x.data(), 20, 15);
  const Vector s = Eigen::JacobiSVD<Matrix>(X).singularValues();
  EXPECT_GT(s[2], 1e-8);
  EXPECT_LT(s[3], 1e-10 * s[0]);

  const auto big = make_completion(401, 401, 5, 0.15, 0.0, 7);
  const double density = dynamic_cast<const EntryMaskOperator&>(*big.A).mask().mean();
  EXPECT_NEAR(density, 0.15, 0.01 * 0.15);
  EXPECT_THROW(make_completion(5, 5, 6, 0.5, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(make_completion(5, 5, 1, 0.0, 0.0, 1), std::invalid_argument);
}

TEST(Completion, NoiselessFullObservationRecoversAtZeroLambda) {
  const auto p = make_completion(10, 8, 2, 1.0, 0.0, 3);
  const auto sys = completion_system(p);
  const auto rep = sr3_prox_grad(sys, p.reg, 0.0, {});
  EXPECT_LE(relative(rep.x, p.truth->x), 1e-4);
}

TEST(GroupSparsity, Construction) {
  const std::vector<std::vector<Index>> grouping{{0, 1}, {2, 3}, {4, 5, 6}};
  const auto p = make_group_sparsity(20, 15, 7, grouping, 0.1, 3);
  EXPECT_EQ(p.C->rows(), 21 * 20);
  EXPECT_EQ(p.A->rows(), 7 * 15);
  const Vector diffs = p.C->apply(p.truth->x);
  for (Index pair = 0; pair < 21; ++pair) {
    const bool zero = diffs.segment(pair * 20, 20).norm() == 0.0;
    const bool in_support =
        std::find(p.truth->support.begin(), p.truth->support.end(), pair) != p.truth->support.end();
    EXPECT_NE(zero, in_support);
  }
  const auto same = make_group_sparsity(5, 4, 3, {{0, 1, 2}}, 0.0, 3);
  EXPECT_EQ(same.C->apply(same.truth->x).norm(), 0.0);
  EXPECT_THROW(make_group_sparsity(5, 4, 3, {{0, 1}}, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(make_group_sparsity(5, 4, 3, {{0, 1}, {1, 2}}, 0.0, 1), std::invalid_argument);
}

TEST(GroupSparsity, Regrouping) {
  const std::vector<std::vector<Index>> grouping{{0, 1}, {2, 3}, {4, 5, 6}};
  const auto p = make_group_sparsity(20, 15, 7, grouping, 0.0, 3);
  const auto exact = regroup_refit(p, p.C->apply(p.truth->x), p.truth->x);
  EXPECT_EQ(exact.clusters, grouping);
  EXPECT_LE(*exact.rel_error, 1e-8);
  const auto merged = regroup_refit(p, Vector::Zero(p.C->rows()), p.truth->x);
  ASSERT_EQ(merged.clusters.size(), 1u);
  EXPECT_EQ(merged.clusters[0].size(), 7u);
}

TEST(Metrics, SupportRecovery) {
  Vector x = Vector::Zero(20);
  const std::vector<Index> truth{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  x.head(10).setConstant(1.0);
  auto m = support_recovery_metrics(x, truth);
  EXPECT_EQ(m.tpp, 1.0);
  EXPECT_EQ(m.fdp, 0.0);
  EXPECT_EQ(m.f1, 1.0);

  x.setZero();
  x.tail(10).setConstant(1.0);
  m = support_recovery_metrics(x, truth);
  EXPECT_EQ(m.tpp, 0.0);
  EXPECT_EQ(m.f1, 0.0);

  x.setZero();
  x.head(8).setConstant(1.0);
  x[15] = x[16] = -0.5;
  m = support_recovery_metrics(x, truth);
  EXPECT_DOUBLE_EQ(m.precision, 0.8);
  EXPECT_DOUBLE_EQ(m.tpp, 0.8);
  EXPECT_DOUBLE_EQ(m.f1, 0.8);

  x.setZero();
  x[0] = 0.01;
  EXPECT_EQ(support_recovery_metrics(x, truth).estimated, 0);
  EXPECT_EQ(support_recovery_metrics(x, truth).fdp, 0.0);
  EXPECT_THROW(support_recovery_metrics(x, {}), std::invalid_argument);
}

TEST(Metrics, Snr) {
  const Vector x = Vector::Ones(4);
  EXPECT_NEAR(snr_db(x, 1.1 * x), 20.0, 1e-12);
}

TEST(Serialization, RoundTripsEveryOperatorKind) {
  std::vector<ProblemSpec> specs;
  specs.push_back(make_lasso(8, 6, 2, 0.1, 1));
  specs.push_back(make_tight_frame_problem(8, 4, 3, 2, 0.1, 1).analysis);
  specs.push_back(make_tv1d(10, 4, 2, 0.1, 1));
  specs.push_back(make_tv2d_deblur(make_phantom(7, 7), 1.0, 2, 0.1, 1));
  specs.push_back(make_completion(5, 4, 2, 0.5, 0.1, 1, prox::SpectralInner::L0));
  specs.push_back(make_group_sparsity(3, 2, 3, {{0, 1}, {2}}, 0.1, 1));
  specs.back().reg = prox::Regularizer::cad(0.5);
  for (const auto& spec : specs) {
    const std::string text = serialize(spec);
    const ProblemSpec back = deserialize(text);
    EXPECT_EQ(serialize(back), text) << spec.kind;
    EXPECT_EQ(back.b, spec.b);
    EXPECT_EQ(back.dense_A(), spec.dense_A());
    EXPECT_EQ(back.C->dense(), spec.C->dense());
    EXPECT_EQ(back.reg.name(), spec.reg.name());
  }
  const auto path = std::filesystem::temp_directory_path() / "sr3_instance_roundtrip.json";
  save_instance(specs[0], path.string());
  EXPECT_EQ(serialize(load_instance(path.string())), serialize(specs[0]));
  std::filesystem::remove(path);
  EXPECT_THROW(deserialize(R"({"format":"other"})"), std::invalid_argument);
}
