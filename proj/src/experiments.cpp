#include <sr3/experiments.hpp>
#include <sr3/problems.hpp>
#include <sr3/solve.hpp>

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace sr3::experiments {

using harness::Cell;
using problems::ProblemSpec;
using prox::Regularizer;

std::uint64_t trial_seed(std::uint64_t base, std::string_view experiment, long trial) {
  return problems::mix_seed(problems::mix_seed(base, problems::stream_id(experiment)),
                            static_cast<std::uint64_t>(trial));
}

std::vector<double> lambda_grid(double lambda_max, long count, double min_ratio) {
  if (count < 1) throw std::invalid_argument("lambda_grid: count must be positive");
  if (!(min_ratio > 0.0 && min_ratio <= 1.0)) throw std::invalid_argument("lambda_grid: min_ratio must lie in (0, 1]");
  std::vector<double> grid(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    grid[static_cast<std::size_t>(i)] = lambda_max * std::pow(min_ratio, t);
  }
  return grid;
}

double zero_lambda(const Regularizer& reg, double g, double eta) {
  if (!(g >= 0.0) || !(eta > 0.0)) throw std::invalid_argument("zero_lambda: need g >= 0 and eta > 0");
  if (g == 0.0) return 0.0;
  Regularizer scalar = reg;
  if (const auto* sv = std::get_if<prox::SingularValues>(&reg.kind()))
    scalar = sv->inner == prox::SpectralInner::L1 ? Regularizer::l1() : Regularizer::l0();
  else if (std::holds_alternative<prox::GroupL2>(reg.kind()))
    scalar = Regularizer::l1();
  const Vector z = Vector::Constant(1, eta * g);
  const auto vanishes = [&](double lambda) { return scalar.prox(z, eta * lambda)[0] == 0.0; };
  double hi = g;
  for (int i = 0; i < 200 && !vanishes(hi); ++i) hi *= 2.0;
  if (!vanishes(hi)) throw std::runtime_error("zero_lambda: " + reg.name() + " never thresholds to zero");
  double lo = 0.0;
  for (int i = 0; i < 100 && hi - lo > 1e-14 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (vanishes(mid) ? hi : lo) = mid;
  }
  return hi;
}

namespace {

Regularizer parse_regularizer(const std::string& name, double cad_rho) {
  if (name == "l1") return Regularizer::l1();
  if (name == "l0") return Regularizer::l0();
  if (name == "l1/2" || name == "lhalf") return Regularizer::lp(0.5);
  if (name == "cad") return Regularizer::cad(cad_rho);
  throw std::invalid_argument("unknown regularizer '" + name + "' (expected l1, l0, l1/2 or cad)");
}

problems::MatrixKind parse_matrix_kind(const std::string& name) {
  if (name == "gaussian") return problems::MatrixKind::Gaussian;
  if (name == "uniform") return problems::MatrixKind::Uniform;
  throw std::invalid_argument("unknown matrix kind '" + name + "' (expected gaussian or uniform)");
}

std::vector<double> sigma_grid(double max, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("sigma_step must be positive");
  std::vector<double> out;
  const long n = std::lround(max / step);
  for (long i = 0; i <= n; ++i) out.push_back(static_cast<double>(i) * step);
  return out;
}

std::vector<Index> support_of(const Vector& x, double threshold) {
  std::vector<Index> s;
  for (Index i = 0; i < x.size(); ++i)
    if (std::abs(x[i]) > threshold) s.push_back(i);
  return s;
}

/// sigma_min(A) sigma_max(A): the ADMM penalty that balances the extreme
/// eigenvalues of A^T A + rho I.
double balanced_rho(const Matrix& A) {
  const Vector s = Eigen::BDCSVD<Matrix>(A).singularValues();
  const double lo = s[s.size() - 1], hi = s[0];
  return lo > 1e-12 * hi ? lo * hi : hi * hi * 1e-3;
}

double squared_norm(const Matrix& A) {
  const double s = Eigen::BDCSVD<Matrix>(A).singularValues()[0];
  return s * s;
}

SolverOptions quiet(long max_iters, double tol) {
  SolverOptions o;
  o.max_iters = static_cast<int>(max_iters);
  o.tol = tol;
  o.record_history = false;
  return o;
}

std::string join_clusters(const std::vector<std::vector<Index>>& clusters) {
  std::ostringstream out;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    out << (c ? " " : "") << '{';
    for (std::size_t i = 0; i < clusters[c].size(); ++i) out << (i ? "," : "") << clusters[c][i];
    out << '}';
  }
  return out.str();
}

std::vector<std::vector<Index>> parse_groups(const std::string& text) {
  // "0,1;2,3;4,5,6"
  std::vector<std::vector<Index>> groups;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, ';')) {
    std::vector<Index> g;
    std::istringstream items(part);
    std::string item;
    while (std::getline(items, item, ','))
      if (item.find_first_not_of(" \t") != std::string::npos) g.push_back(std::stol(item));
    if (!g.empty()) groups.push_back(std::move(g));
  }
  return groups;
}

/// Row helper: starts a row and stamps the fixed parameter cells.
class Rows {
 public:
  Rows(ResultTable& table, std::vector<std::pair<std::string, Cell>> fixed)
      : table_(table), fixed_(std::move(fixed)) {}
  ResultTable& next() {
    table_.add_row();
    for (const auto& [k, v] : fixed_) table_.set(k, v);
    return table_;
  }

 private:
  ResultTable& table_;
  std::vector<std::pair<std::string, Cell>> fixed_;
};

std::vector<std::string> column_names(const std::vector<std::pair<std::string, Cell>>& fixed,
                                      std::initializer_list<const char*> rest) {
  std::vector<std::string> cols;
  for (const auto& kv : fixed) cols.push_back(kv.first);
  for (const char* c : rest) cols.emplace_back(c);
  return cols;
}

Cell seed_cell(std::uint64_t seed) { return std::to_string(seed); }

}  // namespace

// ---------------------------------------------------------------------------

ResultTable run_lasso_path(const Config& cfg) {
  const std::string name = "lasso_path";
  const bool paper = cfg.paper_scale();
  const long m = cfg.get_int("m", paper ? 1010 : 202), d = cfg.get_int("d", paper ? 1000 : 200);
  const long k = cfg.get_int("k", paper ? 200 : 40);
  const double magnitude = cfg.get_double("magnitude", 4.0), sigma = cfg.get_double("sigma", 1.0);
  const double kappa = cfg.get_double("kappa", 100.0), tol = cfg.get_double("tol", 1e-6);
  const long count = cfg.get_int("lambda_count", 100), max_iters = cfg.get_int("max_iters", 100000);
  const double min_ratio = cfg.get_double("lambda_min_ratio", 1e-3), thr = cfg.get_double("threshold", 0.01);
  const long trials = cfg.get_int("trials", 1);
  const std::uint64_t base = cfg.seed();

  const std::vector<std::pair<std::string, Cell>> fixed = {
      {"experiment", name}, {"seed", seed_cell(base)}, {"m", m}, {"d", d}, {"k", k}, {"magnitude", magnitude},
      {"sigma", sigma}, {"kappa", kappa}, {"lambda_count", count}, {"lambda_min_ratio", min_ratio},
      {"tol", tol}, {"max_iters", max_iters}, {"threshold", thr}};
  ResultTable table(name, column_names(fixed, {"trial", "trial_seed", "method", "lambda_index", "lambda_ratio",
                                               "lambda", "tpp", "fdp", "nnz", "iterations"}));
  Rows rows(table, fixed);

  for (long t = 0; t < trials; ++t) {
    const std::uint64_t seed = trial_seed(base, name, t);
    const auto p = problems::make_lasso(m, d, k, sigma, seed, {}, {false, magnitude, false});
    const Matrix A = p.dense_A();
    const auto sys = problems::relaxed_system(p, kappa);
    const double rho = balanced_rho(A);
    const auto grid = lambda_grid(1.0, count, min_ratio);
    const double lmax_std = (A.transpose() * p.b).lpNorm<Eigen::Infinity>(), lmax_sr3 = sys.lambda_max_l1();
    Vector x_std = Vector::Zero(d), w_sr3 = Vector::Zero(d);
    for (long i = 0; i < count; ++i) {
      const double r = grid[static_cast<std::size_t>(i)];
      auto o = quiet(max_iters, tol);
      o.initial = x_std;
      const auto std_run = admm_lasso(A, p.b, r * lmax_std, o, rho);
      o.initial = w_sr3;
      const auto sr3_run = sr3_prox_grad(sys, Regularizer::l1(), r * lmax_sr3, o);
      x_std = std_run.w;
      w_sr3 = sr3_run.w;
      for (const auto* run : {&std_run, &sr3_run}) {
        const bool is_sr3 = run == &sr3_run;
        const auto met = problems::support_recovery_metrics(run->w, p.truth->support, thr);
        rows.next();
        table.set("trial", t);
        table.set("trial_seed", seed_cell(seed));
        table.set("method", std::string(is_sr3 ? "sr3" : "lasso"));
        table.set("lambda_index", i);
        table.set("lambda_ratio", r);
        table.set("lambda", r * (is_sr3 ? lmax_sr3 : lmax_std));
        table.set("tpp", met.tpp);
        table.set("fdp", met.fdp);
        table.set("nnz", static_cast<long>(met.estimated));
        table.set("iterations", static_cast<long>(run->iterations));
      }
    }
  }
  return table;
}

ResultTable run_noise_f1(const Config& cfg) {
  const std::string name = "noise_f1";
  const bool paper = cfg.paper_scale();
  const long m = cfg.get_int("m", 200), d = cfg.get_int("d", 150), k = cfg.get_int("k", 10);
  const double magnitude = cfg.get_double("magnitude", 1.0), kappa = cfg.get_double("kappa", 100.0);
  const double sigma_max = cfg.get_double("sigma_max", 4.0);
  const double sigma_step = cfg.get_double("sigma_step", paper ? 0.2 : 0.4);
  const long trials = cfg.get_int("trials", paper ? 200 : 20);
  const long count = cfg.get_int("lambda_count", 30), max_iters = cfg.get_int("max_iters", 100000);
  const double min_ratio = cfg.get_double("lambda_min_ratio", 1e-3), tol = cfg.get_double("tol", 1e-6);
  const double thr = cfg.get_double("threshold", 0.01);
  const std::uint64_t base = cfg.seed();

  const std::vector<std::pair<std::string, Cell>> fixed = {
      {"experiment", name}, {"seed", seed_cell(base)}, {"m", m}, {"d", d}, {"k", k}, {"magnitude", magnitude},
      {"kappa", kappa}, {"lambda_count", count}, {"lambda_min_ratio", min_ratio}, {"tol", tol},
      {"max_iters", max_iters}, {"threshold", thr}};
  ResultTable table(name, column_names(fixed, {"sigma", "trial", "trial_seed", "method", "best_f1",
                                               "best_lambda_ratio"}));
  Rows rows(table, fixed);
  const auto grid = lambda_grid(1.0, count, min_ratio);

  for (const double sigma : sigma_grid(sigma_max, sigma_step)) {
    for (long t = 0; t < trials; ++t) {
      const std::uint64_t seed = trial_seed(base, name, t);
      const auto p = problems::make_lasso(m, d, k, sigma, seed, {}, {true, magnitude, true});
      const Matrix A = p.dense_A();
      const auto sys = problems::relaxed_system(p, kappa);
      const double rho = balanced_rho(A);
      const double lmax_std = (A.transpose() * p.b).lpNorm<Eigen::Infinity>(), lmax_sr3 = sys.lambda_max_l1();
      Vector x_std = Vector::Zero(d), w_sr3 = Vector::Zero(d);
      double best_std = -1.0, best_sr3 = -1.0, at_std = 1.0, at_sr3 = 1.0;
      for (const double r : grid) {
        auto o = quiet(max_iters, tol);
        o.initial = x_std;
        x_std = admm_lasso(A, p.b, r * lmax_std, o, rho).w;
        o.initial = w_sr3;
        w_sr3 = sr3_prox_grad(sys, Regularizer::l1(), r * lmax_sr3, o).w;
        const double f_std = problems::support_recovery_metrics(x_std, p.truth->support, thr).f1;
        const double f_sr3 = problems::support_recovery_metrics(w_sr3, p.truth->support, thr).f1;
        if (f_std > best_std) best_std = f_std, at_std = r;
        if (f_sr3 > best_sr3) best_sr3 = f_sr3, at_sr3 = r;
      }
      for (const bool is_sr3 : {false, true}) {
        rows.next();
        table.set("sigma", sigma);
        table.set("trial", t);
        table.set("trial_seed", seed_cell(seed));
        table.set("method", std::string(is_sr3 ? "sr3" : "lasso"));
        table.set("best_f1", is_sr3 ? best_sr3 : best_std);
        table.set("best_lambda_ratio", is_sr3 ? at_sr3 : at_std);
      }
    }
  }
  return table;
}

ResultTable run_iters_vs_cond(const Config& cfg) {
  const std::string name = "iters_vs_cond";
  const bool paper = cfg.paper_scale();
  const long m = cfg.get_int("m", paper ? 600 : 120), d = cfg.get_int("d", paper ? 500 : 100);
  const long k = cfg.get_int("k", paper ? 50 : 10);
  const double sigma = cfg.get_double("sigma", 0.1), magnitude = cfg.get_double("magnitude", 1.0);
  const double kappa = cfg.get_double("kappa", 1.0), tol = cfg.get_double("tol", 1e-5);
  const double fraction = cfg.get_double("lambda_fraction", 0.2), rho = cfg.get_double("admm_rho", 1.0);
  const long repeats = cfg.get_int("repeats", 10), max_iters = cfg.get_int("max_iters", 100000);
  const auto conds = cfg.get_list("conds", {1, 5, 10, 25, 50, 100});
  const std::uint64_t base = cfg.seed();

  const std::vector<std::pair<std::string, Cell>> fixed = {
      {"experiment", name}, {"seed", seed_cell(base)}, {"m", m}, {"d", d}, {"k", k}, {"sigma", sigma},
      {"magnitude", magnitude}, {"kappa", kappa}, {"tol", tol}, {"lambda_fraction", fraction},
      {"admm_rho", rho}, {"max_iters", max_iters}};
  ResultTable table(name, column_names(fixed, {"cond", "repeat", "trial_seed", "method", "lambda", "iterations",
                                               "converged"}));
  Rows rows(table, fixed);

  for (const double cond : conds) {
    for (long r = 0; r < repeats; ++r) {
      const std::uint64_t seed = trial_seed(base, name, r);
      const auto p = problems::make_lasso(m, d, k, sigma, seed, {problems::MatrixKind::Conditioned, cond},
                                          {true, magnitude, true});
      const Matrix A = p.dense_A();
      const auto sys = problems::relaxed_system(p, kappa);
      const double l_std = fraction * (A.transpose() * p.b).lpNorm<Eigen::Infinity>();
      const double l_sr3 = fraction * sys.lambda_max_l1();
      const auto o = quiet(max_iters, tol);
      const SolveReport runs[] = {sr3_prox_grad(sys, Regularizer::l1(), l_sr3, o),
                                  std_prox_grad(A, p.b, Regularizer::l1(), l_std, o),
                                  admm_lasso(A, p.b, l_std, o, rho)};
      const char* methods[] = {"sr3", "prox_grad", "admm"};
      for (int i = 0; i < 3; ++i) {
        rows.next();
        table.set("cond", cond);
        table.set("repeat", r);
        table.set("trial_seed", seed_cell(seed));
        table.set("method", std::string(methods[i]));
        table.set("lambda", i == 0 ? l_sr3 : l_std);
        table.set("iterations", static_cast<long>(runs[i].iterations));
        table.set("converged", static_cast<long>(runs[i].converged));
      }
    }
  }
  return table;
}

ResultTable run_cs_recovery(const Config& cfg) {
  const std::string name = "cs_recovery";
  const bool paper = cfg.paper_scale();
  const long d = cfg.get_int("d", paper ? 500 : 100), k = cfg.get_int("k", paper ? 20 : 5);
  const long trials = cfg.get_int("trials", 25);
  const double magnitude = cfg.get_double("magnitude", 2.0), sigma = cfg.get_double("sigma", 0.1);
  const double kappa = cfg.get_double("kappa", 5.0), cad_rho = cfg.get_double("cad_rho", 0.5);
  const long count = cfg.get_int("lambda_count", 30), max_iters = cfg.get_int("max_iters", 5000);
  const double min_ratio = cfg.get_double("lambda_min_ratio", 1e-3), tol = cfg.get_double("tol", 1e-6);
  const double thr = cfg.get_double("threshold", 0.01);
  const auto ratios = cfg.get_list("ratios", {1, 2, 4, 6, 8, 10, 12, 15, 20});
  const auto kinds = cfg.get_words("matrix_kinds", {"gaussian", "uniform"});
  const auto regs = cfg.get_words("regularizers", {"l1", "l0", "l1/2", "cad"});
  const auto forms = cfg.get_words("formulations", {"standard", "sr3"});
  const std::uint64_t base = cfg.seed();

  const std::vector<std::pair<std::string, Cell>> fixed = {
      {"experiment", name}, {"seed", seed_cell(base)}, {"d", d}, {"k", k}, {"trials", trials},
      {"magnitude", magnitude}, {"sigma", sigma}, {"kappa", kappa}, {"cad_rho", cad_rho},
      {"lambda_count", count}, {"lambda_min_ratio", min_ratio}, {"tol", tol}, {"max_iters", max_iters},
      {"threshold", thr}};
  ResultTable table(name, column_names(fixed, {"matrix_kind", "m", "m_over_k", "regularizer", "formulation",
                                               "successes", "recovery_rate"}));
  Rows rows(table, fixed);
  const auto grid = lambda_grid(1.0, count, min_ratio);

  for (const auto& kind : kinds) {
    const auto matrix_kind = parse_matrix_kind(kind);
    for (const double ratio : ratios) {
      const long m = std::lround(ratio * static_cast<double>(k));
      // successes[reg][form]
      std::vector<std::vector<long>> successes(regs.size(), std::vector<long>(forms.size(), 0));
      for (long t = 0; t < trials; ++t) {
        const std::uint64_t seed = trial_seed(base, name, t);
        const auto p = problems::make_lasso(m, d, k, sigma, seed, {matrix_kind}, {true, magnitude, true});
        const Matrix A = p.dense_A();
        const auto& truth = p.truth->support;
        const auto sys = problems::relaxed_system(p, kappa);
        const double step = 1.0 / (1.01 * squared_norm(A));
        const double g_std = (A.transpose() * p.b).lpNorm<Eigen::Infinity>(), g_sr3 = sys.lambda_max_l1();
        for (std::size_t ri = 0; ri < regs.size(); ++ri) {
          const auto reg = parse_regularizer(regs[ri], cad_rho);
          for (std::size_t fi = 0; fi < forms.size(); ++fi) {
            const bool relaxed = forms[fi] == "sr3";
            if (!relaxed && forms[fi] != "standard")
              throw std::invalid_argument("unknown formulation '" + forms[fi] + "' (expected standard or sr3)");
            const double lmax = relaxed ? zero_lambda(reg, g_sr3, 1.0 / kappa) : zero_lambda(reg, g_std, step);
            Vector start = Vector::Zero(d);
            for (const double r : grid) {
              auto o = quiet(max_iters, tol);
              o.initial = start;
              if (!relaxed) o.step = step;
              const auto run = relaxed ? sr3_prox_grad(sys, reg, r * lmax, o) : std_prox_grad(A, p.b, reg, r * lmax, o);
              start = run.w;
              if (support_of(run.w, thr) == truth) {
                ++successes[ri][fi];
                break;
              }
            }
          }
        }
      }
      for (std::size_t ri = 0; ri < regs.size(); ++ri)
        for (std::size_t fi = 0; fi < forms.size(); ++fi) {
          rows.next();
          table.set("matrix_kind", kind);
          table.set("m", m);
          table.set("m_over_k", ratio);
          table.set("regularizer", regs[ri]);
          table.set("formulation", forms[fi]);
          table.set("successes", successes[ri][fi]);
          table.set("recovery_rate", static_cast<double>(successes[ri][fi]) / static_cast<double>(trials));
        }
    }
  }
  return table;
}

ResultTable run_analysis_demo(const Config& cfg) {
  const std::string name = "analysis_demo";
  const bool paper = cfg.paper_scale();
  const long n = cfg.get_int("n", paper ? 1024 : 256), d = cfg.get_int("d", paper ? 512 : 128);
  const long m = cfg.get_int("m", paper ? 128 : 64), k = cfg.get_int("k", paper ? 15 : 8);
  const double sigma = cfg.get_double("sigma", 0.1), kappa = cfg.get_double("kappa", 5.0);
  const double fraction = cfg.get_double("lambda_fraction", 0.5), tol = cfg.get_double("tol", 1e-8);
  const long max_iters = cfg.get_int("max_iters", 20000);
  const double thr = cfg.get_double("threshold", 0.01);
  const std::uint64_t base = cfg.seed();
  const std::uint64_t seed = trial_seed(base, name, 0);

  const std::vector<std::pair<std::string, Cell>> fixed = {
      {"experiment", name}, {"seed", seed_cell(base)}, {"trial_seed", seed_cell(seed)}, {"n", n}, {"d", d},
      {"m", m}, {"k", k}, {"sigma", sigma}, {"kappa", kappa}, {"lambda_fraction", fraction}, {"tol", tol},
      {"max_iters", max_iters}, {"threshold", thr}};
  ResultTable table(name, column_names(fixed, {"record", "method", "index", "xi_true", "w", "Cx", "lambda", "f1",
                                               "off_support_nonzeros", "iterations"}));
  Rows rows(table, fixed);

  auto pair = problems::make_tight_frame_problem(n, d, m, k, sigma, seed);
  pair.analysis.kappa = pair.synthesis.kappa = kappa;
  const auto& truth = pair.analysis.truth->support;
  std::vector<bool> on_support(static_cast<std::size_t>(n), false);
  for (const Index i : truth) on_support[static_cast<std::size_t>(i)] = true;

  struct Outcome {
    Vector w, Cx;
  };
  std::vector<Outcome> outcomes;
  for (const ProblemSpec* spec : {&pair.analysis, &pair.synthesis}) {
    const bool analysis = spec == &pair.analysis;
    const auto sys = problems::relaxed_system(*spec);
    const double lambda = fraction * sys.lambda_max_l1();
    const auto run = sr3_prox_grad(sys, spec->reg, lambda, quiet(max_iters, tol));
    // Synthesis coefficients are xi itself, so C x is x(w) there.
    const Vector Cx = sys.apply_C(run.x);
    long off = 0;
    for (Index i = 0; i < n; ++i)
      if (!on_support[static_cast<std::size_t>(i)] && std::abs(Cx[i]) > thr) ++off;
    rows.next();
    table.set("record", std::string("summary"));
    table.set("method", std::string(analysis ? "analysis" : "synthesis"));
    table.set("lambda", lambda);
    table.set("f1", problems::support_recovery_metrics(run.w, truth, thr).f1);
    table.set("off_support_nonzeros", off);
    table.set("iterations", static_cast<long>(run.iterations));
    outcomes.push_back({run.w, Cx});
  }
  for (std::size_t o = 0; o < outcomes.size(); ++o)
    for (Index i = 0; i < n; ++i) {
      rows.next();
      table.set("record", std::string("coefficient"));
      table.set("method", std::string(o == 0 ? "analysis" : "synthesis"));
      table.set("index", static_cast<long>(i));
      table.set("xi_true", pair.xi_true[i]);
      table.set("w", outcomes[o].w[i]);
      table.set("Cx", outcomes[o].Cx[i]);
    }
  return table;
}

ResultTable run_tv_deblur(const Config& cfg) {
  const std::string name = "tv_deblur";
  const bool paper = cfg.paper_scale();
  const long size = cfg.get_int("size", paper ? 256 : 128);
  const long spectrum_size = cfg.get_int("spectrum_size", 64);
  const double kernel_sigma = cfg.get_double("kernel_sigma", 2.0), nu = cfg.get_double("nu", 2.0);
  const long halfwidth = cfg.get_int("halfwidth", 4), iterations = cfg.get_int("iterations", 200);
  const double lambda = cfg.get_double("lambda", 0.075), kappa = cfg.get_double("kappa", 0.25);
  // 8-bit grey levels.
  const double intensity = cfg.get_double("intensity", 255.0);
  const std::uint64_t base = cfg.seed();
  const std::uint64_t seed = trial_seed(base, name, 0);

  const std::vector<std::pair<std::string, Cell>> fixed = {
      {"experiment", name}, {"seed", seed_cell(base)}, {"trial_seed", seed_cell(seed)}, {"size", size},
      {"spectrum_size", spectrum_size}, {"intensity", intensity}, {"kernel_sigma", kernel_sigma},
      {"halfwidth", halfwidth}, {"nu", nu}, {"lambda", lambda}, {"kappa", kappa}, {"iterations", iterations}};
  ResultTable table(name, column_names(fixed, {"record", "method", "iteration", "index", "value"}));
  Rows rows(table, fixed);

  const Matrix image = intensity * problems::make_phantom(size, size);
  auto spec = problems::make_tv2d_deblur(image, kernel_sigma, halfwidth, nu, seed);
  spec.lambda = lambda;
  spec.kappa = kappa;
  const problems::ConvolutionTvSystem sys(spec);
  const Vector x_true = spec.truth->x;

  SolverOptions o;
  o.max_iters = static_cast<int>(iterations);
  o.tol = 0.0;
  const auto plain = sr3_prox_grad(sys, spec.reg, lambda, o);
  const auto fast = sr3_fista(sys, spec.reg, lambda, o);
  for (const auto* run : {&plain, &fast})
    for (std::size_t i = 0; i < run->loss_history.size(); ++i) {
      rows.next();
      table.set("record", std::string("trace"));
      table.set("method", std::string(run == &plain ? "sr3" : "sr3_fista"));
      table.set("iteration", static_cast<long>(i));
      table.set("value", run->loss_history[i]);
    }

  const double target = plain.loss_history.back();
  long reach = -1;
  for (std::size_t i = 0; i < fast.loss_history.size(); ++i)
    if (fast.loss_history[i] <= target) {
      reach = static_cast<long>(i);
      break;
    }
  const double kernel_mass = sys.convolution().kernel().sum();
  const std::pair<const char*, double> summary[] = {
      {"plain_final_loss", target},
      {"fista_iterations_to_plain_loss", static_cast<double>(reach)},
      {"snr_input", problems::snr_db(x_true, spec.b / kernel_mass)},
      {"snr_sr3", problems::snr_db(x_true, plain.x)},
      {"snr_sr3_fista", problems::snr_db(x_true, fast.x)},
      {"snr_deconvolution", problems::snr_db(x_true, sys.deconvolve())},
  };
  for (const auto& [metric, value] : summary) {
    rows.next();
    table.set("record", std::string("summary"));
    table.set("method", std::string(metric));
    table.set("value", value);
  }

  const Matrix small = problems::make_phantom(spectrum_size, spectrum_size);
  auto spectrum_spec = problems::make_tv2d_deblur(small, kernel_sigma, halfwidth, nu, seed);
  spectrum_spec.kappa = kappa;
  const auto spectrum = problems::tv_spectrum(spectrum_spec);
  for (Index i = 0; i < spectrum.singular_values.size(); ++i) {
    rows.next();
    table.set("record", std::string("spectrum"));
    table.set("method", std::string("F"));
    table.set("index", static_cast<long>(i));
    table.set("value", spectrum.singular_values[i]);
  }
  return table;
}

ResultTable run_tv1d(const Config& cfg) {
  const std::string name = "tv1d";
  const long d = cfg.get_int("d", 500), m = cfg.get_int("m", 100), jumps = cfg.get_int("jumps", 4);
  const double sigma = cfg.get_double("sigma", 1.0), kappa = cfg.get_double("kappa", 1.0);
  const double lambda_l1 = cfg.get_double("lambda_l1", 0.07), lambda_l0 = cfg.get_double("lambda_l0", 0.007);
  const double tol = cfg.get_double("tol", 1e-8);
  const long max_iters = cfg.get_int("max_iters", 50000);
  const std::uint64_t base = cfg.seed();
  const std::uint64_t seed = trial_seed(base, name, 0);

  const std::vector<std::pair<std::string, Cell>> fixed = {
      {"experiment", name}, {"seed", seed_cell(base)}, {"trial_seed", seed_cell(seed)}, {"d", d}, {"m", m},
      {"jumps", jumps}, {"sigma", sigma}, {"kappa", kappa}, {"tol", tol}, {"max_iters", max_iters}};
  ResultTable table(name, column_names(fixed, {"record", "method", "lambda", "index", "x_true", "x_hat",
                                               "x_segments", "x_integrated", "w", "metric", "value"}));
  Rows rows(table, fixed);

  const auto spec = problems::make_tv1d(d, m, jumps, sigma, seed);
  const auto sys = problems::relaxed_system(spec, kappa);
  const Vector& x_true = spec.truth->x;
  const Vector true_jumps = sys.apply_C(x_true);

  for (const auto& [method, reg, lambda] :
       {std::tuple{std::string("l1"), Regularizer::l1(), lambda_l1},
        std::tuple{std::string("l0"), Regularizer::l0(), lambda_l0}}) {
    const auto run = sr3_prox_grad(sys, reg, lambda, quiet(max_iters, tol));
    const auto grouped = problems::regroup_refit(spec, run.w, run.x);
    // Cumulative sum of w, shifted to share the mean of x(w).
    Vector integrated(d);
    integrated[0] = 0.0;
    for (Index i = 0; i + 1 < d; ++i) integrated[i + 1] = integrated[i] + run.w[i];
    integrated.array() += (run.x - integrated).mean();
    double bias = 0.0;
    for (const Index j : spec.truth->support)
      bias += std::abs(std::abs(run.w[j]) - std::abs(true_jumps[j])) / std::abs(true_jumps[j]);
    bias /= static_cast<double>(spec.truth->support.size());
    const double norm = x_true.norm();
    const std::pair<const char*, double> metrics[] = {
        {"rel_error_x", (run.x - x_true).norm() / norm},
        {"rel_error_segments", (grouped.x_refit - x_true).norm() / norm},
        {"rel_error_integrated", (integrated - x_true).norm() / norm},
        {"jump_bias", bias},
        {"segments", static_cast<double>(grouped.clusters.size())},
        {"iterations", static_cast<double>(run.iterations)},
    };
    for (const auto& [metric, value] : metrics) {
      rows.next();
      table.set("record", std::string("summary"));
      table.set("method", method);
      table.set("lambda", lambda);
      table.set("metric", std::string(metric));
      table.set("value", value);
    }
    for (Index i = 0; i < d; ++i) {
      rows.next();
      table.set("record", std::string("signal"));
      table.set("method", method);
      table.set("lambda", lambda);
      table.set("index", static_cast<long>(i));
      table.set("x_true", x_true[i]);
      table.set("x_hat", run.x[i]);
      table.set("x_segments", grouped.x_refit[i]);
      table.set("x_integrated", integrated[i]);
      table.set("w", i + 1 < d ? Cell(run.w[i]) : Cell());
    }
  }
  return table;
}

ResultTable run_completion_pareto(const Config& cfg) {
  const std::string name = "completion_pareto";
  const bool paper = cfg.paper_scale();
  const long rows_n = cfg.get_int("rows", paper ? 401 : 200), cols_n = cfg.get_int("cols", paper ? 401 : 200);
  const long rank = cfg.get_int("rank", 5);
  const double frac = cfg.get_double("observe_frac", 0.15), sigma = cfg.get_double("sigma", 0.1);
  const double kappa = cfg.get_double("kappa", 0.5), tol = cfg.get_double("tol", 1e-5);
  const long count = cfg.get_int("lambda_count", 20), max_iters = cfg.get_int("max_iters", 200);
  const double min_ratio = cfg.get_double("lambda_min_ratio", 1e-2);
  const double rank_tol = cfg.get_double("rank_tol", 1e-8);
  const long max_rank = cfg.get_int("max_rank", 30);
  const std::uint64_t base = cfg.seed();
  const std::uint64_t seed = trial_seed(base, name, 0);

  const std::vector<std::pair<std::string, Cell>> fixed = {
      {"experiment", name}, {"seed", seed_cell(base)}, {"trial_seed", seed_cell(seed)}, {"rows", rows_n},
      {"cols", cols_n}, {"rank", rank}, {"observe_frac", frac}, {"sigma", sigma}, {"kappa", kappa}, {"tol", tol},
      {"lambda_count", count}, {"lambda_min_ratio", min_ratio}, {"max_iters", max_iters},
      {"rank_tol", rank_tol}};
  ResultTable table(name, column_names(fixed, {"record", "formulation", "lambda", "solution_rank", "misfit",
                                               "snr_heldout", "iterations"}));
  Rows rows(table, fixed);

  const auto spec = problems::make_completion(rows_n, cols_n, rank, frac, sigma, seed);
  const auto& mask = static_cast<const EntryMaskOperator&>(*spec.A).mask();
  const Vector& x_true = spec.truth->x;
  const auto sys = problems::completion_system(spec, kappa);
  const double data_norm = spec.b.norm();
  const auto as_matrix = [&](const Vector& v) { return Eigen::Map<const Matrix>(v.data(), rows_n, cols_n); };
  const double top = Eigen::BDCSVD<Matrix>(as_matrix(spec.b)).singularValues()[0];
  const auto rank_of = [&](const Vector& v) {
    const Vector s = Eigen::BDCSVD<Matrix>(as_matrix(v)).singularValues();
    return static_cast<long>((s.array() > rank_tol * std::max(s[0], 1.0)).count());
  };
  const auto heldout_snr = [&](const Vector& x) {
    const Eigen::ArrayXd held = 1.0 - mask;
    const double signal = (held * x_true.array()).matrix().norm();
    const double err = (held * (x - x_true).array()).matrix().norm();
    return 20.0 * std::log10(signal / err);
  };

  struct Formulation {
    std::string name;
    prox::SpectralInner inner;
    bool relaxed;
  };
  const Formulation forms[] = {{"classic_l1", prox::SpectralInner::L1, false},
                               {"classic_l0", prox::SpectralInner::L0, false},
                               {"sr3_l1", prox::SpectralInner::L1, true},
                               {"sr3_l0", prox::SpectralInner::L0, true}};
  for (const auto& f : forms) {
    const auto reg = Regularizer::singular_values(f.inner, rows_n, cols_n);
    // Gradient at zero: -A^T b for the classic problem (step 1) and
    // -kappa x(0) = -kappa/(1+kappa) b for the relaxed one (step 1/kappa).
    const double lmax = f.relaxed ? zero_lambda(reg, kappa / (1.0 + kappa) * top, 1.0 / kappa)
                                  : zero_lambda(reg, top, 1.0);
    Vector start = Vector::Zero(rows_n * cols_n);
    std::vector<std::pair<long, double>> points;
    // The l0 threshold is sqrt(2 eta lambda); squaring the ratio makes both
    // penalties sweep the same range of singular-value thresholds.
    const double ratio = f.inner == prox::SpectralInner::L0 ? min_ratio * min_ratio : min_ratio;
    for (const double r : lambda_grid(lmax, count, ratio)) {
      auto o = quiet(max_iters, tol);
      o.initial = start;
      SolveReport run;
      if (f.relaxed) {
        run = sr3_prox_grad(sys, reg, r, o);
      } else {
        o.step = 1.0;
        run = std_prox_grad(*spec.A, spec.b, reg, r, o);
      }
      start = run.w;
      const long rk = rank_of(run.w);
      const double misfit = (mask * run.w.array() - spec.b.array()).matrix().norm() / data_norm;
      points.emplace_back(rk, misfit);
      rows.next();
      table.set("record", std::string("point"));
      table.set("formulation", f.name);
      table.set("lambda", r);
      table.set("solution_rank", rk);
      table.set("misfit", misfit);
      table.set("snr_heldout", heldout_snr(run.x));
      table.set("iterations", static_cast<long>(run.iterations));
    }
    // Best misfit achievable with rank at most r.
    double best = std::numeric_limits<double>::infinity();
    for (long r = 0; r <= max_rank; ++r) {
      for (const auto& [rk, misfit] : points)
        if (rk == r) best = std::min(best, misfit);
      if (!std::isfinite(best)) continue;
      rows.next();
      table.set("record", std::string("frontier"));
      table.set("formulation", f.name);
      table.set("solution_rank", r);
      table.set("misfit", best);
    }
  }
  return table;
}

ResultTable run_group_sparsity(const Config& cfg) {
  const std::string name = "group_sparsity";
  const bool paper = cfg.paper_scale();
  const long n = cfg.get_int("n", paper ? 200 : 100), m_i = cfg.get_int("m_i", 150);
  const long tasks = cfg.get_int("tasks", 7);
  const std::string grouping_text = cfg.get_string("grouping", "0,1;2,3;4,5,6");
  const double sigma = cfg.get_double("sigma", 0.1), lambda = cfg.get_double("lambda", 10.0);
  const double kappa = cfg.get_double("kappa", 1.0), tol = cfg.get_double("tol", 1e-7);
  const long max_iters = cfg.get_int("max_iters", 20000), trials = cfg.get_int("trials", 1);
  const std::uint64_t base = cfg.seed();
  const auto grouping = parse_groups(grouping_text);

  const std::vector<std::pair<std::string, Cell>> fixed = {
      {"experiment", name}, {"seed", seed_cell(base)}, {"n", n}, {"m_i", m_i}, {"tasks", tasks},
      {"grouping", grouping_text}, {"sigma", sigma}, {"lambda", lambda}, {"kappa", kappa}, {"tol", tol},
      {"max_iters", max_iters}};
  ResultTable table(name, column_names(fixed, {"trial", "trial_seed", "record", "task_i", "task_j", "distance",
                                               "clusters", "recovered", "rel_error_before", "rel_error_after",
                                               "iterations"}));
  Rows rows(table, fixed);

  for (long t = 0; t < trials; ++t) {
    const std::uint64_t seed = trial_seed(base, name, t);
    auto spec = problems::make_group_sparsity(n, m_i, tasks, grouping, sigma, seed);
    spec.lambda = lambda;
    spec.kappa = kappa;
    const auto sys = problems::relaxed_system(spec);
    const auto run = sr3_prox_grad(sys, spec.reg, lambda, quiet(max_iters, tol));
    const auto grouped = problems::regroup_refit(spec, run.w, run.x);
    const Vector& x_true = spec.truth->x;
    for (long i = 0; i < tasks; ++i)
      for (long j = 0; j < tasks; ++j) {
        rows.next();
        table.set("trial", t);
        table.set("trial_seed", seed_cell(seed));
        table.set("record", std::string("distance"));
        table.set("task_i", i);
        table.set("task_j", j);
        table.set("distance", (run.x.segment(i * n, n) - run.x.segment(j * n, n)).norm());
      }
    rows.next();
    table.set("trial", t);
    table.set("trial_seed", seed_cell(seed));
    table.set("record", std::string("summary"));
    table.set("clusters", join_clusters(grouped.clusters));
    table.set("recovered", static_cast<long>(grouped.clusters == spec.task_groups));
    table.set("rel_error_before", (run.x - x_true).norm() / x_true.norm());
    table.set("rel_error_after", grouped.rel_error ? Cell(*grouped.rel_error) : Cell());
    table.set("iterations", static_cast<long>(run.iterations));
  }
  return table;
}

// ---------------------------------------------------------------------------

const std::vector<Experiment>& registry() {
  static const std::vector<Experiment> all = [] {
    std::vector<Experiment> e;
    e.push_back({"lasso_path", "TPP/FDP path of LASSO and SR3 along a lambda grid", run_lasso_path,
                 {{"", {"FDP against TPP along the lambda path", "tpp", "fdp", "method", "", "", false, false, true}}}});
    e.push_back({"noise_f1", "best-lambda F1 against noise level, LASSO and SR3", run_noise_f1,
                 {{"", {"Mean best F1 against noise", "sigma", "best_f1", "method", "", "", false, false, true}}}});
    e.push_back({"iters_vs_cond", "iterations to tolerance against cond(A): SR3, prox-gradient, ADMM",
                 run_iters_vs_cond,
                 {{"", {"Iterations against condition number", "cond", "iterations", "method", "", "", true, true,
                        true}}}});
    e.push_back({"cs_recovery", "compressed sensing recovery rate against m/k", run_cs_recovery,
                 {{"", {"Recovery rate, Gaussian matrices", "m_over_k", "recovery_rate", "formulation",
                        "matrix_kind", "gaussian", false, false, false}},
                  {"_uniform", {"Recovery rate, uniform matrices", "m_over_k", "recovery_rate", "formulation",
                                "matrix_kind", "uniform", false, false, false}}}});
    e.push_back({"analysis_demo", "analysis SR3 with a tight frame: w, Cx and true coefficients",
                 run_analysis_demo,
                 {{"", {"Analysis coefficients", "index", "w", "method", "record", "coefficient", false, false,
                        false}}}});
    e.push_back({"tv_deblur", "TV deblurring loss traces and the spectrum of F", run_tv_deblur,
                 {{"", {"Loss against iteration", "iteration", "value", "method", "record", "trace", false, true,
                        false}},
                  {"_spectrum", {"Singular values of F", "index", "value", "method", "record", "spectrum", false,
                                 false, false}}}});
    e.push_back({"tv1d", "1-D TV with l1 and l0: recovered signals and jump bias", run_tv1d,
                 {{"", {"Recovered signal", "index", "x_segments", "method", "record", "signal", false, false,
                        false}}}});
    e.push_back({"completion_pareto", "matrix completion Pareto frontiers: misfit against rank",
                 run_completion_pareto,
                 {{"", {"Pareto frontiers", "solution_rank", "misfit", "formulation", "record", "frontier", false,
                        true, false}}}});
    e.push_back({"group_sparsity", "pairwise distances between task solutions and regrouped error",
                 run_group_sparsity,
                 {{"", {"Pairwise task distances", "task_j", "distance", "task_i", "record", "distance", false,
                        false, true}}}});
    return e;
  }();
  return all;
}

const Experiment* find_experiment(std::string_view name) {
  for (const auto& e : registry())
    if (e.name == name) return &e;
  return nullptr;
}

std::vector<std::string> run_and_write(const Experiment& experiment, const Config& cfg, const std::string& out_dir) {
  const ResultTable table = experiment.run(cfg.section(experiment.name));
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  std::vector<std::string> written;
  const std::string csv = (dir / (experiment.name + ".csv")).string();
  harness::write_file(csv, table.to_csv());
  written.push_back(csv);
  for (const auto& plot : experiment.plots) {
    const std::string svg = (dir / (experiment.name + plot.suffix + ".svg")).string();
    harness::write_file(svg, harness::render_svg(table, plot.spec));
    written.push_back(svg);
  }
  return written;
}

}  // namespace sr3::experiments
