#include <sr3/verify.hpp>

#include <sr3/experiments.hpp>
#include <sr3/oracle.hpp>
#include <sr3/problems.hpp>
#include <sr3/solve.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace sr3::verify {

namespace {

using experiments::Config;
using experiments::ResultTable;
using problems::Rng;
using prox::Regularizer;

struct Outcome {
  bool passed = false;
  std::string summary;
};

std::string printf_string(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Config config(std::initializer_list<std::pair<const char*, std::string>> values) {
  Config cfg;
  for (const auto& [k, v] : values) cfg.set(k, v);
  return cfg;
}

Matrix gaussian(Rng& rng, Index rows, Index cols) { return rng.normal(rows, cols); }

Index uniform_int(Rng& rng, Index lo, Index hi) {
  return lo + static_cast<Index>(std::floor(rng.uniform() * static_cast<double>(hi - lo + 1)));
}

// ---------------------------------------------------------------------------
// 1. Prox operators against the grid oracle.

constexpr double kGridStep = 1e-3;
constexpr int kQueries = 10000;

bool scalar_agrees(const oracle::Penalty& penalty, double z, double alpha, double x) {
  const auto ref = oracle::grid_prox(penalty, z, alpha, kGridStep);
  const double objective = 0.5 * (x - z) * (x - z) + alpha * penalty(x);
  return std::abs(x - ref.argmin[0]) <= 1e-6 || objective <= ref.objective + 1e-10;
}

Outcome prox_suite() {
  using Kind = oracle::Penalty::Kind;
  Rng rng(1, 1);
  const auto draw_z = [&] { return 6.0 * rng.uniform() - 3.0; };
  const auto draw_alpha = [&] { return 0.05 + 1.95 * rng.uniform(); };
  std::map<std::string, int> failures;
  const auto scalar_family = [&](const std::string& name, Kind kind, auto&& prox_fn, auto&& draw_param) {
    int& bad = failures[name];
    for (int q = 0; q < kQueries; ++q) {
      const double z = draw_z(), alpha = draw_alpha(), param = draw_param();
      const double x = prox_fn(z, alpha, param);
      if (!scalar_agrees({kind, param}, z, alpha, x)) ++bad;
    }
  };
  const auto one = [](double z) { return Vector::Constant(1, z); };
  const auto none = [] { return 0.0; };
  scalar_family("l1", Kind::L1, [&](double z, double a, double) { return prox::prox_l1(one(z), a)[0]; }, none);
  scalar_family("l0", Kind::L0, [&](double z, double a, double) { return prox::prox_l0(one(z), a)[0]; }, none);
  scalar_family("l1/2", Kind::Lp, [&](double z, double a, double p) { return prox::prox_lp(one(z), a, p)[0]; },
                [] { return 0.5; });
  scalar_family("l1/4", Kind::Lp, [&](double z, double a, double p) { return prox::prox_lp(one(z), a, p)[0]; },
                [] { return 0.25; });
  scalar_family("cad", Kind::Cad, [&](double z, double a, double r) { return prox::prox_cad(one(z), a, r)[0]; },
                [&] { return 0.2 + 1.8 * rng.uniform(); });
  scalar_family("l2^2", Kind::SqL2, [&](double z, double a, double) { return prox::prox_sq_l2(one(z), a)[0]; },
                none);
  scalar_family("nonnegative", Kind::Nonnegative,
                [&](double z, double, double) { return prox::project_set(one(z), prox::Nonnegative{})[0]; }, none);

  int& group_bad = failures["group-l2"];
  for (int q = 0; q < kQueries; ++q) {
    const Index dim = uniform_int(rng, 2, 6);
    const Vector y = 1.5 * rng.normal(dim);
    const double alpha = draw_alpha();
    const Vector x = prox::prox_group_l2(y, alpha, prox::GroupPartition::contiguous(1, dim));
    const auto ref = oracle::grid_prox_group(y, alpha, kGridStep);
    const double objective = 0.5 * (x - y).squaredNorm() + alpha * x.norm();
    if (!((x - ref.argmin).lpNorm<Eigen::Infinity>() <= 1e-6 || objective <= ref.objective + 1e-10)) ++group_bad;
  }
  int& sphere_bad = failures["sphere"];
  for (int q = 0; q < kQueries; ++q) {
    const Vector y = 2.0 * rng.normal(2);
    const double radius = 0.2 + 2.8 * rng.uniform();
    const Vector x = prox::project_set(y, prox::Sphere{radius});
    const auto ref = oracle::grid_project_circle(y, radius, kGridStep);
    const bool on_sphere = std::abs(x.norm() - radius) <= 1e-12 * std::max(1.0, radius);
    const double objective = on_sphere ? 0.5 * (x - y).squaredNorm() : INFINITY;
    if (!((x - ref.argmin).lpNorm<Eigen::Infinity>() <= 1e-6 || objective <= ref.objective + 1e-10)) ++sphere_bad;
  }

  int total = 0;
  std::string detail;
  for (const auto& [name, bad] : failures) {
    total += bad;
    if (bad) detail += " " + name + ":" + std::to_string(bad);
  }
  return {total == 0, printf_string("%d families x %d queries, grid step %g, mismatches %d%s",
                                    static_cast<int>(failures.size()), kQueries, kGridStep, total,
                                    detail.c_str())};
}

// ---------------------------------------------------------------------------
// 2. Closed-form spectra of F.

Outcome spectral_theorems() {
  Rng rng(2, 1);
  double worst_matrix = 0.0, worst_values = 0.0, worst_frame = 0.0;
  int count_mismatch = 0;
  for (int t = 0; t < 50; ++t) {
    const Index m = uniform_int(rng, 6, 20), d = uniform_int(rng, 3, 15);
    const double kappa = std::pow(10.0, 2.0 * rng.uniform() - 1.0);
    const Matrix A = gaussian(rng, m, d);
    const auto sys = RelaxedSystem::build(A, rng.normal(m), kappa);
    const Matrix F = sys.form_F_explicit().F;
    const Matrix FtF = F.transpose() * F;
    const Matrix inner = Matrix::Identity(m, m) + A * A.transpose() / kappa;
    const Matrix predicted = A.transpose() * inner.ldlt().solve(A);
    worst_matrix = std::max(worst_matrix, (FtF - predicted).norm() / predicted.norm());
    const Vector ata = Eigen::SelfAdjointEigenSolver<Matrix>(A.transpose() * A).eigenvalues();
    const Vector got = Eigen::SelfAdjointEigenSolver<Matrix>(FtF).eigenvalues();
    const Vector want = (ata.array() / (1.0 + ata.array() / kappa)).matrix();
    worst_values = std::max(worst_values, (got - want).cwiseAbs().maxCoeff() / want.cwiseAbs().maxCoeff());
  }
  for (int t = 0; t < 20; ++t) {
    const Index d = uniform_int(rng, 4, 10), n = d + uniform_int(rng, 1, d + 3), m = uniform_int(rng, 5, 15);
    const double kappa = std::pow(10.0, 2.0 * rng.uniform() - 1.0);
    const Matrix C = rng.orthogonal(n).leftCols(d);
    const Matrix A = gaussian(rng, m, d);
    const auto sys = RelaxedSystem::build(A, std::make_shared<DenseOperator>(C), rng.normal(m), kappa);
    const Vector got = Eigen::JacobiSVD<Matrix>(sys.form_F_explicit().F).singularValues();
    const Vector sa = Eigen::JacobiSVD<Matrix>(A).singularValues();
    Vector want = Vector::Zero(n);
    want.head(n - d).setConstant(std::sqrt(kappa));
    for (Index i = 0; i < sa.size() && i < d; ++i)
      want[n - d + i] = std::sqrt(kappa) * sa[i] / std::sqrt(kappa + sa[i] * sa[i]);
    worst_frame = std::max(worst_frame, (got - want).cwiseAbs().maxCoeff() / std::sqrt(kappa));
    const Index at_root = ((got.array() - std::sqrt(kappa)).abs() <= 1e-9).count();
    if (at_root != n - d) ++count_mismatch;
  }
  const bool ok = worst_matrix <= 1e-8 && worst_values <= 1e-8 && worst_frame <= 1e-8 && count_mismatch == 0;
  return {ok, printf_string("C=I: F^T F rel err %.2e, eigenvalue rel err %.2e; tight frame: rel err %.2e, "
                            "instances with wrong count at sqrt(kappa) %d/20",
                            worst_matrix, worst_values, worst_frame, count_mismatch)};
}

// ---------------------------------------------------------------------------
// 3. Distance to stationarity at the matched lambda.

Outcome optimal_ratio_bound() {
  Rng rng(3, 1);
  int violations = 0;
  double worst_ratio = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Index d = uniform_int(rng, 8, 20), m = d + uniform_int(rng, 0, 20);
    const double kappa = 0.5 + 4.5 * rng.uniform();
    const Matrix A = gaussian(rng, m, d);
    const Vector b = rng.normal(m);
    const auto sys = RelaxedSystem::build(A, b, kappa);
    const auto ratio = sys.optimal_ratio();
    const double lambda1 = (0.05 + 0.4 * rng.uniform()) * (A.transpose() * b).lpNorm<Eigen::Infinity>();
    SolverOptions o;
    o.max_iters = 500000;
    o.tol = 1e-14;
    o.record_history = false;
    const Vector w = sr3_prox_grad(sys, Regularizer::l1(), ratio.tau * lambda1, o).w;
    const double residual = *stationarity_residual(A, b, Regularizer::l1(), lambda1, w);
    const double bound = ratio.coefficient * (A.transpose() * (A * w - b)).norm();
    if (residual > bound * (1.0 + 1e-9) + 1e-12) ++violations;
    if (bound > 0) worst_ratio = std::max(worst_ratio, residual / bound);
  }
  return {violations == 0,
          printf_string("20 instances, violations %d, max residual/bound %.4f", violations, worst_ratio)};
}

// ---------------------------------------------------------------------------
// 4. Iterations against conditioning.

Outcome iterations_vs_conditioning() {
  const auto table = experiments::run_iters_vs_cond(
      config({{"m", "120"}, {"d", "100"}, {"conds", "50"}, {"repeats", "10"}, {"seed", "4"}}));
  std::map<std::string, std::vector<double>> counts;
  for (std::size_t r = 0; r < table.size(); ++r)
    counts[table.text(r, "method")].push_back(table.number(r, "iterations"));
  const double sr3 = median(counts["sr3"]), pg = median(counts["prox_grad"]), admm = median(counts["admm"]);
  return {sr3 <= 0.2 * pg && sr3 <= 0.05 * admm,
          printf_string("cond 50 medians: sr3 %.0f, prox-grad %.0f (ratio %.3f), admm %.0f (ratio %.4f)", sr3, pg,
                        sr3 / pg, admm, admm > 0 ? sr3 / admm : 0.0)};
}

// ---------------------------------------------------------------------------
// 5. LASSO path.

Outcome lasso_path() {
  const long trials = 10;
  const auto table = experiments::run_lasso_path(config({{"trials", std::to_string(trials)}, {"seed", "5"}}));
  int sr3_exact = 0, lasso_early_fd = 0;
  for (long t = 0; t < trials; ++t) {
    bool exact = false;
    long first_fd = -1, first_full = -1;
    for (std::size_t r = 0; r < table.size(); ++r) {
      if (table.number(r, "trial") != static_cast<double>(t)) continue;
      const double tpp = table.number(r, "tpp"), fdp = table.number(r, "fdp");
      const long i = static_cast<long>(table.number(r, "lambda_index"));
      if (table.text(r, "method") == "sr3") {
        exact = exact || (tpp == 1.0 && fdp == 0.0);
      } else {
        if (fdp > 0 && first_fd < 0) first_fd = i;
        if (tpp == 1.0 && first_full < 0) first_full = i;
      }
    }
    sr3_exact += exact;
    lasso_early_fd += first_fd >= 0 && (first_full < 0 || first_fd < first_full);
  }
  return {sr3_exact >= 9 && lasso_early_fd >= 7,
          printf_string("SR3 exact support on the path in %d/10 seeds; LASSO false discovery before full TPP in "
                        "%d/10 seeds",
                        sr3_exact, lasso_early_fd)};
}

// ---------------------------------------------------------------------------
// 6. Best-lambda F1 against noise.

Outcome noise_robustness() {
  const auto table = experiments::run_noise_f1(config({{"seed", "6"}}));
  std::map<double, std::pair<double, double>> sums;  // sigma -> (lasso, sr3)
  for (std::size_t r = 0; r < table.size(); ++r) {
    auto& s = sums[table.number(r, "sigma")];
    (table.text(r, "method") == "sr3" ? s.second : s.first) += table.number(r, "best_f1");
  }
  int worse = 0;
  std::string detail;
  for (const auto& [sigma, s] : sums) {
    if (s.second < s.first) ++worse;
    detail += printf_string(" %.1f:%.3f/%.3f", sigma, s.first / 20.0, s.second / 20.0);
  }
  return {worse == 0, printf_string("sigma levels where SR3 < LASSO: %d; mean F1 lasso/sr3:%s", worse,
                                    detail.c_str())};
}

// ---------------------------------------------------------------------------
// 7. Compressed sensing recovery.

double recovery_rate(const std::string& kind, double ratio, const std::string& reg, const std::string& form) {
  const auto table = experiments::run_cs_recovery(config({{"matrix_kinds", kind},
                                                          {"ratios", printf_string("%g", ratio)},
                                                          {"regularizers", reg},
                                                          {"formulations", form},
                                                          {"seed", "7"}}));
  return table.number(0, "recovery_rate");
}

Outcome cs_recovery() {
  const double u_l0 = recovery_rate("uniform", 10, "l0", "sr3"), u_cad = recovery_rate("uniform", 10, "cad", "sr3");
  const double u_l1 = recovery_rate("uniform", 10, "l1", "standard");
  const double g_l0 = recovery_rate("gaussian", 15, "l0", "sr3"), g_cad = recovery_rate("gaussian", 15, "cad", "sr3");
  const double g_l1 = recovery_rate("gaussian", 15, "l1", "standard");
  const bool ok = u_l0 >= 0.9 && u_cad >= 0.9 && u_l1 <= 0.3 && g_l0 == 1.0 && g_cad == 1.0 && g_l1 == 1.0;
  return {ok, printf_string("uniform m/k=10: sr3-l0 %.2f, sr3-cad %.2f, standard-l1 %.2f; gaussian m/k=15: "
                            "sr3-l0 %.2f, sr3-cad %.2f, standard-l1 %.2f",
                            u_l0, u_cad, u_l1, g_l0, g_cad, g_l1)};
}

// ---------------------------------------------------------------------------
// 8. TV spectrum.

Outcome tv_spectrum_count() {
  const double kappa = 0.25;
  auto spec = problems::make_tv2d_deblur(problems::make_phantom(64, 64), 2.0, 4, 2.0, 8);
  spec.kappa = kappa;
  const auto spectrum = problems::tv_spectrum(spec);
  const Vector& s = spectrum.singular_values;
  const Index count = spectrum.count_at_sqrt_kappa(1e-10);
  const bool in_range = s.minCoeff() >= 0.0 && s.maxCoeff() <= std::sqrt(kappa) * (1.0 + 1e-12);
  return {count == 4096 && in_range && s.size() == 8192,
          printf_string("%ld of %ld singular values equal sqrt(kappa) within 1e-10 (required exactly 4096); "
                        "range [%.3e, %.15f], sqrt(kappa) = %.15f",
                        static_cast<long>(count), static_cast<long>(s.size()), s.minCoeff(), s.maxCoeff(),
                        std::sqrt(kappa))};
}

// ---------------------------------------------------------------------------
// 9. TV deblurring.

Outcome tv_deblurring() {
  const auto table = experiments::run_tv_deblur(config({{"seed", "9"}, {"spectrum_size", "16"}}));
  std::map<std::string, double> summary;
  for (const auto r : table.where("record", "summary")) summary[table.text(r, "method")] = table.number(r, "value");
  const double reach = summary["fista_iterations_to_plain_loss"];
  const double gain = summary["snr_sr3_fista"] - summary["snr_input"];
  return {reach >= 0 && reach <= 60 && gain >= 6.0,
          printf_string("FISTA reaches the 200-iteration plain loss at iteration %.0f; SNR input %.2f dB, "
                        "recovered %.2f dB (gain %.2f dB)",
                        reach, summary["snr_input"], summary["snr_sr3_fista"], gain)};
}

// ---------------------------------------------------------------------------
// 10. Matrix completion Pareto frontiers.

Outcome completion_frontiers() {
  const auto table = experiments::run_completion_pareto(config({{"seed", "10"}}));
  std::map<std::string, std::map<long, double>> frontier;
  for (const auto r : table.where("record", "frontier"))
    frontier[table.text(r, "formulation")][static_cast<long>(table.number(r, "solution_rank"))] =
        table.number(r, "misfit");
  const auto& l0 = frontier["sr3_l0"];
  int compared = 0, violations = 0;
  for (const auto& [rank, value] : l0) {
    for (const char* other : {"sr3_l1", "classic_l1"}) {
      const auto& f = frontier[other];
      const auto it = f.find(rank);
      if (it == f.end()) continue;
      ++compared;
      if (value > it->second + 1e-6) ++violations;
    }
  }
  std::string ranks;
  for (const auto& [rank, value] : l0) ranks += printf_string(" %ld:%.4f", rank, value);
  return {compared > 0 && violations == 0,
          printf_string("%d rank comparisons, violations %d; sr3-l0 frontier%s", compared, violations,
                        ranks.c_str())};
}

// ---------------------------------------------------------------------------
// 11. Group sparsity.

Outcome group_sparsity() {
  const auto table = experiments::run_group_sparsity(config({{"paper_scale", "true"}, {"trials", "10"}, {"seed", "11"}}));
  int good = 0;
  double worst_after = 0.0, mean_before = 0.0;
  const auto rows = table.where("record", "summary");
  for (const auto r : rows) {
    const double after = table.number(r, "rel_error_after");
    good += table.number(r, "recovered") == 1.0 && after <= 0.02;
    worst_after = std::max(worst_after, after);
    mean_before += table.number(r, "rel_error_before") / static_cast<double>(rows.size());
  }
  return {good >= 9, printf_string("grouping recovered with error <= 0.02 in %d/10 seeds; mean error before "
                                   "regrouping %.3f, worst after %.4f",
                                   good, mean_before, worst_after)};
}

// ---------------------------------------------------------------------------
// 12. Rate certificates.

Outcome rate_certificates_suite() {
  Rng rng(12, 1);
  int violations = 0, unchecked = 0;
  for (int t = 0; t < 20; ++t) {
    const Index d = uniform_int(rng, 10, 30), m = uniform_int(rng, 10, 40);
    const double kappa = std::pow(10.0, 2.0 * rng.uniform() - 1.0);
    const Matrix A = gaussian(rng, m, d);
    const Vector b = rng.normal(m);
    OperatorPtr C;
    Regularizer reg = Regularizer::l1();
    if (t < 12) {
      C = std::make_shared<IdentityOperator>(d);
    } else if (t < 16) {
      C = std::make_shared<DenseOperator>(Matrix(rng.orthogonal(d + 5).leftCols(d)));
    } else {
      C = std::make_shared<DenseOperator>(gaussian(rng, 2 * d, d));
      reg = Regularizer::group_l2(prox::GroupPartition::contiguous(d, 2));
    }
    const auto sys = RelaxedSystem::build(A, C, b, kappa);
    const double lambda = (0.05 + 0.5 * rng.uniform()) * sys.lambda_max_l1();
    SolverOptions o;
    o.max_iters = 3000;
    o.tol = 1e-12;
    o.record_iterates = true;
    const auto run = sr3_prox_grad(sys, reg, lambda, o);
    const auto cert = rate_certificates(run, sys, reg, lambda);
    violations += cert.sublinear_violations + cert.gap_violations + cert.linear_violations;
    unchecked += !(cert.sublinear_checked && cert.gap_checked);
  }
  return {violations == 0 && unchecked == 0,
          printf_string("20 convex instances, violations %d, instances missing a check %d", violations, unchecked)};
}

// ---------------------------------------------------------------------------
// 13. Small l0 problems against exhaustive search.

Outcome l0_global() {
  Rng rng(13, 1);
  const double kappa = 5.0, lambda0 = 0.02;
  int matches = 0;
  std::string misses;
  for (int t = 0; t < 50; ++t) {
    const Index d = 6 + t % 7, m = 2 * d, k = std::max<Index>(2, d / 4);
    const Matrix A = gaussian(rng, m, d) / std::sqrt(static_cast<double>(m));
    Vector x = Vector::Zero(d);
    for (const Index i : rng.sample(d, k)) x[i] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.3 + 1.2 * rng.uniform());
    const Vector b = A * x + 0.05 * rng.normal(m);
    const auto global = oracle::exhaustive_l0(A, b, lambda0);
    std::vector<Index> target;
    for (Index i = 0; i < d; ++i)
      if (global.argmin[i] != 0.0) target.push_back(i);

    const auto sys = RelaxedSystem::build(A, b, kappa);
    const double lmax = experiments::zero_lambda(Regularizer::l0(), sys.lambda_max_l1(), 1.0 / kappa);
    Vector start = Vector::Zero(d);
    bool found = false;
    for (const double lambda : experiments::lambda_grid(lmax, 60, 1e-4)) {
      SolverOptions o;
      o.max_iters = 20000;
      o.tol = 1e-10;
      o.record_history = false;
      o.initial = start;
      start = sr3_prox_grad(sys, Regularizer::l0(), lambda, o).w;
      std::vector<Index> support;
      for (Index i = 0; i < d; ++i)
        if (std::abs(start[i]) > 0.01) support.push_back(i);
      if (support == target) {
        found = true;
        break;
      }
    }
    matches += found;
    if (!found) misses += " " + std::to_string(t);
  }
  return {matches >= 40, printf_string("SR3-l0 path contains the global l0 support in %d/50 instances%s%s", matches,
                                       misses.empty() ? "" : "; missed:", misses.c_str())};
}

struct Entry {
  const char* name;
  Outcome (*run)();
};

const Entry kCriteria[] = {
    {"prox oracle suite", prox_suite},
    {"spectral theorems", spectral_theorems},
    {"optimal ratio bound", optimal_ratio_bound},
    {"iterations vs conditioning", iterations_vs_conditioning},
    {"lasso path", lasso_path},
    {"noise robustness", noise_robustness},
    {"compressed sensing recovery", cs_recovery},
    {"TV spectrum", tv_spectrum_count},
    {"TV deblurring", tv_deblurring},
    {"matrix completion frontiers", completion_frontiers},
    {"group sparsity", group_sparsity},
    {"rate certificates", rate_certificates_suite},
    {"small l0 global check", l0_global},
};

// Wall-clock budgets stated with the criteria (seconds); 0 means none.
constexpr double kBudget[] = {30, 10, 0, 60, 0, 0, 0, 0, 0, 0, 120, 0, 0};

}  // namespace

CriterionResult run_criterion(int id) {
  if (id < 1 || id > 13) throw std::out_of_range("criterion id must be in 1..13");
  const auto& entry = kCriteria[id - 1];
  CriterionResult result;
  result.id = id;
  result.name = entry.name;
  const auto start = std::chrono::steady_clock::now();
  try {
    const Outcome o = entry.run();
    result.passed = o.passed;
    result.summary = o.summary;
  } catch (const std::exception& err) {
    result.passed = false;
    result.summary = std::string("exception: ") + err.what();
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double budget = kBudget[id - 1];
  if (budget > 0 && result.seconds > budget) {
    result.passed = false;
    result.summary += printf_string("; over the %.0f s budget", budget);
  }
  return result;
}

std::vector<CriterionResult> run_all() {
  std::vector<CriterionResult> out;
  for (int id = 1; id <= 13; ++id) out.push_back(run_criterion(id));
  return out;
}

std::string format_line(const CriterionResult& r) {
  return printf_string("%s [%2d] %s (%.1f s): ", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str(), r.seconds) +
         r.summary;
}

}  // namespace sr3::verify
