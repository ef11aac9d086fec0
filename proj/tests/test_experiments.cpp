#include <sr3/experiments.hpp>
#include <sr3/problems.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

using namespace sr3;
using namespace sr3::experiments;

namespace {

Config config(std::initializer_list<std::pair<const char*, const char*>> values) {
  Config cfg;
  for (const auto& [k, v] : values) cfg.set(k, v);
  return cfg;
}

std::map<std::string, double> summary(const ResultTable& t, const std::string& method, const std::string& key) {
  std::map<std::string, double> out;
  for (const auto r : t.where("record", "summary"))
    if (t.text(r, "method") == method) out[t.text(r, key)] = t.number(r, "value");
  return out;
}

// Every row names its experiment and seed, and every parameter column is
// filled.
void expect_self_describing(const ResultTable& t, std::initializer_list<const char*> params) {
  for (std::size_t r = 0; r < t.size(); ++r) {
    EXPECT_EQ(t.text(r, "experiment"), t.experiment());
    EXPECT_FALSE(t.text(r, "seed").empty());
    for (const char* p : params) EXPECT_FALSE(t.text(r, p).empty()) << p;
  }
}

}  // namespace

TEST(LambdaGrid, LogSpacedFromTheTop) {
  const auto g = lambda_grid(2.0, 4, 1e-3);
  ASSERT_EQ(g.size(), 4u);
  EXPECT_DOUBLE_EQ(g.front(), 2.0);
  EXPECT_NEAR(g.back(), 2e-3, 1e-15);
  EXPECT_NEAR(g[1] / g[0], 0.1, 1e-12);
  EXPECT_EQ(lambda_grid(3.0, 1, 0.5), std::vector<double>{3.0});
  EXPECT_THROW(lambda_grid(1.0, 0, 0.1), std::invalid_argument);
  EXPECT_THROW(lambda_grid(1.0, 3, 0.0), std::invalid_argument);
}

TEST(ZeroLambda, ClosedFormsAndThreshold) {
  using prox::Regularizer;
  EXPECT_NEAR(zero_lambda(Regularizer::l1(), 3.0, 0.5), 3.0, 1e-12);
  // Hard threshold sqrt(2 eta lambda) reaches eta g at lambda = eta g^2 / 2.
  EXPECT_NEAR(zero_lambda(Regularizer::l0(), 3.0, 0.5), 2.25, 1e-12);
  EXPECT_NEAR(zero_lambda(Regularizer::singular_values(prox::SpectralInner::L0, 2, 2), 3.0, 0.5), 2.25, 1e-12);
  for (const auto& reg : {Regularizer::lp(0.5), Regularizer::cad(0.5)}) {
    const double l = zero_lambda(reg, 2.0, 0.2);
    const Vector z = Vector::Constant(1, 0.4);
    EXPECT_EQ(reg.prox(z, 0.2 * l)[0], 0.0);
    EXPECT_NE(reg.prox(z, 0.2 * l * (1 - 1e-9))[0], 0.0);
  }
  EXPECT_EQ(zero_lambda(Regularizer::l1(), 0.0, 1.0), 0.0);
}

TEST(TrialSeed, DependsOnEveryPart) {
  EXPECT_EQ(trial_seed(1, "tv1d", 0), trial_seed(1, "tv1d", 0));
  EXPECT_NE(trial_seed(1, "tv1d", 0), trial_seed(1, "tv1d", 1));
  EXPECT_NE(trial_seed(1, "tv1d", 0), trial_seed(2, "tv1d", 0));
  EXPECT_NE(trial_seed(1, "tv1d", 0), trial_seed(1, "noise_f1", 0));
}

TEST(Registry, NamesAndLookup) {
  std::set<std::string> names;
  for (const auto& e : registry()) {
    names.insert(e.name);
    EXPECT_FALSE(e.figure.empty());
    EXPECT_FALSE(e.plots.empty());
    EXPECT_EQ(find_experiment(e.name), &e);
  }
  EXPECT_EQ(names.size(), 9u);
  EXPECT_EQ(find_experiment("nope"), nullptr);
}

TEST(LassoPath, EndpointsOfThePath) {
  const auto t = run_lasso_path(config({{"m", "60"}, {"d", "50"}, {"k", "10"}, {"lambda_count", "12"}}));
  ASSERT_EQ(t.size(), 24u);
  expect_self_describing(t, {"m", "d", "k", "kappa", "magnitude", "sigma"});
  for (std::size_t r = 0; r < t.size(); ++r) {
    if (t.number(r, "lambda_index") == 0) {
      EXPECT_EQ(t.number(r, "tpp"), 0.0);
      EXPECT_EQ(t.number(r, "fdp"), 0.0);
    }
    if (t.number(r, "lambda_index") == 11) EXPECT_EQ(t.number(r, "tpp"), 1.0);
  }
}

TEST(NoiseF1, RowCountAndNoiselessRecovery) {
  const auto t = run_noise_f1(config({{"m", "60"}, {"d", "40"}, {"k", "4"}, {"trials", "2"}, {"sigma_max", "0.8"},
                                      {"lambda_count", "15"}}));
  EXPECT_EQ(t.size(), 3u * 2u * 2u);
  expect_self_describing(t, {"m", "d", "k", "kappa", "sigma"});
  for (std::size_t r = 0; r < t.size(); ++r)
    if (t.number(r, "sigma") == 0.0) EXPECT_EQ(t.number(r, "best_f1"), 1.0);
}

TEST(ItersVsCond, WellConditionedBaseline) {
  const auto t = run_iters_vs_cond(config({{"conds", "1"}, {"repeats", "3"}}));
  ASSERT_EQ(t.size(), 9u);
  for (std::size_t r = 0; r < t.size(); ++r) {
    EXPECT_LE(t.number(r, "iterations"), 100) << t.text(r, "method");
    EXPECT_EQ(t.number(r, "converged"), 1.0);
  }
}

TEST(CsRecovery, OverdeterminedNoiselessAndSquareLimit) {
  const auto full = run_cs_recovery(config({{"ratios", "20"}, {"sigma", "0"}, {"trials", "5"},
                                            {"matrix_kinds", "gaussian,uniform"}, {"regularizers", "l0"},
                                            {"formulations", "sr3"}}));
  ASSERT_EQ(full.size(), 2u);
  for (std::size_t r = 0; r < full.size(); ++r) EXPECT_EQ(full.number(r, "recovery_rate"), 1.0);
  const auto square = run_cs_recovery(config({{"ratios", "1"}, {"trials", "5"}}));
  ASSERT_EQ(square.size(), 16u);
  for (std::size_t r = 0; r < square.size(); ++r) EXPECT_LE(square.number(r, "recovery_rate"), 0.2);
}

TEST(AnalysisDemo, CxIsNotSparse) {
  const auto t = run_analysis_demo(config({}));
  expect_self_describing(t, {"n", "d", "m", "k", "kappa"});
  const auto rows = t.where("record", "summary");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(t.text(rows[0], "method"), "analysis");
  EXPECT_GT(t.number(rows[0], "f1"), 0.0);
  EXPECT_GT(t.number(rows[0], "off_support_nonzeros"), 0.0);
  EXPECT_EQ(t.where("record", "coefficient").size(), 2u * 256u);
}

TEST(TvDeblur, TraceAndSpectrumRecords) {
  const auto t = run_tv_deblur(config({{"size", "32"}, {"spectrum_size", "16"}, {"iterations", "30"}}));
  EXPECT_EQ(t.where("record", "trace").size(), 2u * 31u);
  EXPECT_FALSE(t.where("record", "spectrum").empty());
  std::map<std::string, double> metrics;
  for (const auto r : t.where("record", "summary")) metrics[t.text(r, "method")] = t.number(r, "value");
  EXPECT_GT(metrics.at("snr_sr3_fista"), metrics.at("snr_input"));
}

TEST(Tv1d, ConstantSignalHasNoJumps) {
  const auto constant = run_tv1d(config({{"jumps", "0"}, {"sigma", "0.1"}}));
  for (const auto r : constant.where("record", "signal"))
    if (constant.text(r, "method") == "l1" && !constant.text(r, "w").empty())
      EXPECT_EQ(constant.number(r, "w"), 0.0);
}

TEST(Tv1d, L0HasSmallerJumpBias) {
  const auto t = run_tv1d(config({}));
  EXPECT_LT(summary(t, "l0", "metric").at("jump_bias"), summary(t, "l1", "metric").at("jump_bias"));
}

TEST(CompletionPareto, FrontiersAreMonotone) {
  const auto t = run_completion_pareto(
      config({{"rows", "40"}, {"cols", "30"}, {"rank", "2"}, {"observe_frac", "0.5"}, {"lambda_count", "8"}}));
  std::map<std::string, std::vector<double>> frontier;
  for (const auto r : t.where("record", "frontier")) frontier[t.text(r, "formulation")].push_back(t.number(r, "misfit"));
  EXPECT_EQ(frontier.size(), 4u);
  for (const auto& [name, values] : frontier)
    for (std::size_t i = 1; i < values.size(); ++i) EXPECT_LE(values[i], values[i - 1]) << name;
}

TEST(CompletionPareto, FullObservationAtTrueRankFitsExactly) {
  const auto t = run_completion_pareto(config(
      {{"rows", "30"}, {"cols", "20"}, {"rank", "3"}, {"observe_frac", "1"}, {"sigma", "0"}, {"max_iters", "2000"},
       {"tol", "1e-12"}, {"lambda_count", "12"}}));
  for (const auto r : t.where("record", "frontier"))
    if (t.text(r, "formulation") == "sr3_l0" && t.number(r, "solution_rank") == 3) EXPECT_LE(t.number(r, "misfit"), 1e-6);
}

TEST(GroupSparsity, NoiselessRegroupingIsExact) {
  const auto t = run_group_sparsity(config({{"sigma", "0"}, {"tol", "1e-10"}}));
  const auto rows = t.where("record", "summary");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(t.number(rows[0], "recovered"), 1.0);
  EXPECT_LE(t.number(rows[0], "rel_error_after"), 1e-8);
  EXPECT_EQ(t.text(rows[0], "clusters"), "{0,1} {2,3} {4,5,6}");
  EXPECT_EQ(t.where("record", "distance").size(), 49u);
}

TEST(RunAndWrite, ReplayGivesIdenticalBytes) {
  const auto dir = std::filesystem::temp_directory_path() / "sr3_replay_test";
  std::filesystem::remove_all(dir);
  const auto* e = find_experiment("iters_vs_cond");
  ASSERT_NE(e, nullptr);
  auto cfg = Config::from_text("seed = 4\n[iters_vs_cond]\nconds = 1, 10\nrepeats = 2\n");
  const auto read = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  };
  const auto first = run_and_write(*e, cfg, (dir / "a").string());
  const auto second = run_and_write(*e, cfg, (dir / "b").string());
  ASSERT_EQ(first.size(), 2u);
  for (std::size_t i = 0; i < first.size(); ++i) EXPECT_EQ(read(first[i]), read(second[i]));
  EXPECT_NE(read(first[0]).find("iters_vs_cond,4,"), std::string::npos);
  std::filesystem::remove_all(dir);
}
