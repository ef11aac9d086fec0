#include <sr3/solve.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sr3 {

using prox::Regularizer;

namespace {

constexpr double kDivergenceFactor = 10.0;
constexpr double kCertificateSlack = 1e-12;

struct SmoothEval {
  double value;
  Vector grad;
};

double penalized(double smooth, double lambda, double r) { return lambda == 0.0 ? smooth : smooth + lambda * r; }

bool stopped(const Vector& next, const Vector& prev, double tol) {
  return (next - prev).norm() <= tol * (1.0 + next.norm());
}

bool diverging(double loss, double best) {
  return loss > kDivergenceFactor * best && loss - best > 1e-12 * (1.0 + std::abs(best));
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Vector starting_point(const SolverOptions& opts, Index n) {
  if (!opts.initial) return Vector::Zero(n);
  if (opts.initial->size() != n) throw std::invalid_argument("solver: initial point has the wrong length");
  return *opts.initial;
}

void check_common(double lambda, const SolverOptions& opts) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("solver: lambda must be >= 0");
  if (opts.max_iters < 1) throw std::invalid_argument("solver: max_iters must be positive");
  if (!(opts.tol >= 0.0)) throw std::invalid_argument("solver: tol must be >= 0");
  if (opts.step && !(*opts.step > 0.0)) throw std::invalid_argument("solver: step must be positive");
}

// Shared proximal-gradient iteration.  `eval` returns the smooth part and its
// gradient at a point.
template <class Eval>
SolveReport prox_gradient_loop(const Eval& eval, Index n, const Regularizer& reg, double lambda, double step,
                               const SolverOptions& opts, std::string method) {
  const auto start = std::chrono::steady_clock::now();
  SolveReport rep;
  rep.method = std::move(method);
  rep.step = step;
  rep.initial = starting_point(opts, n);

  Vector w = rep.initial;
  SmoothEval cur = eval(w);
  double loss = penalized(cur.value, lambda, reg.value(w));
  double best = loss;
  Vector best_w = w;
  if (opts.record_history) rep.loss_history.push_back(loss);
  if (opts.record_iterates) rep.iterates.push_back(w);

  for (int k = 1; k <= opts.max_iters; ++k) {
    auto next = reg.prox_evaluated(w - step * cur.grad, step * lambda);
    SmoothEval ev = eval(next.x);
    loss = penalized(ev.value, lambda, next.value);
    rep.iterations = k;
    if (opts.record_history) {
      rep.loss_history.push_back(loss);
      rep.stationarity_history.push_back(((w - next.x) / step + ev.grad - cur.grad).norm());
    }
    if (opts.record_iterates) rep.iterates.push_back(next.x);
    const bool done = stopped(next.x, w, opts.tol);
    w = std::move(next.x);
    cur = std::move(ev);
    if (loss < best) {
      best = loss;
      best_w = w;
      rep.best_iteration = k;
    }
    if (diverging(loss, best)) {
      rep.diverged = true;
      break;
    }
    if (done) {
      rep.converged = true;
      break;
    }
  }
  if (reg.is_convex()) {
    rep.w = std::move(w);
    rep.final_loss = loss;
  } else {
    rep.w = std::move(best_w);
    rep.final_loss = best;
  }
  rep.wall_time = seconds_since(start);
  return rep;
}

}  // namespace

double relaxed_objective(const RelaxedModel& model, const Regularizer& reg, double lambda, const Vector& w) {
  return penalized(model.value_grad(w).value, lambda, reg.value(w));
}

SolveReport sr3_prox_grad(const RelaxedModel& model, const Regularizer& reg, double lambda, const SolverOptions& opts) {
  check_common(lambda, opts);
  const double step = opts.step.value_or(1.0 / model.kappa());
  const auto eval = [&](const Vector& w) {
    auto vg = model.value_grad(w);
    return SmoothEval{vg.value, std::move(vg.grad)};
  };
  SolveReport rep = prox_gradient_loop(eval, model.w_size(), reg, lambda, step, opts, "sr3");
  rep.x = model.solve_x(rep.w);
  return rep;
}

double fista_next_momentum(double a_prev) { return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * a_prev * a_prev)); }

SolveReport sr3_fista(const RelaxedModel& model, const Regularizer& reg, double lambda, const SolverOptions& opts) {
  check_common(lambda, opts);
  if (!reg.is_convex()) throw std::invalid_argument("sr3_fista: requires a convex regularizer, got " + reg.name());
  const auto start = std::chrono::steady_clock::now();
  const double step = opts.step.value_or(1.0 / model.kappa());

  SolveReport rep;
  rep.method = "sr3_fista";
  rep.step = step;
  rep.initial = starting_point(opts, model.w_size());

  Vector extrapolated = rep.initial;
  Vector v_prev = rep.initial;
  double a_prev = 1.0;
  double loss = relaxed_objective(model, reg, lambda, rep.initial);
  if (opts.record_history) rep.loss_history.push_back(loss);
  if (opts.record_iterates) rep.iterates.push_back(rep.initial);
  double best = loss;

  for (int k = 1; k <= opts.max_iters; ++k) {
    const auto at_w = model.value_grad(extrapolated);
    auto next = reg.prox_evaluated(extrapolated - step * at_w.grad, step * lambda);
    const double a = fista_next_momentum(a_prev);
    Vector following = next.x + ((a_prev - 1.0) / a) * (next.x - v_prev);

    const auto at_v = model.value_grad(next.x);
    loss = penalized(at_v.value, lambda, next.value);
    rep.iterations = k;
    if (opts.record_history) {
      rep.loss_history.push_back(loss);
      rep.stationarity_history.push_back(((extrapolated - next.x) / step + at_v.grad - at_w.grad).norm());
    }
    if (opts.record_iterates) rep.iterates.push_back(next.x);
    const bool done = stopped(next.x, v_prev, opts.tol);
    v_prev = std::move(next.x);
    extrapolated = std::move(following);
    a_prev = a;
    if (loss < best) {
      best = loss;
      rep.best_iteration = k;
    }
    if (diverging(loss, best)) {
      rep.diverged = true;
      break;
    }
    if (done) {
      rep.converged = true;
      break;
    }
  }
  rep.w = std::move(v_prev);
  rep.x = model.solve_x(rep.w);
  rep.final_loss = loss;
  rep.wall_time = seconds_since(start);
  return rep;
}

SolveReport std_prox_grad(const LinearOperator& A, const Vector& b, const Regularizer& reg, double lambda,
                          const SolverOptions& opts) {
  check_common(lambda, opts);
  if (A.rows() != b.size()) throw std::invalid_argument("std_prox_grad: A and b disagree in row count");
  double step = 0.0;
  if (opts.step) {
    step = *opts.step;
  } else {
    const double norm_sq = estimate_squared_norm(A);
    if (!(norm_sq > 0.0)) throw std::invalid_argument("std_prox_grad: A is zero");
    step = 1.0 / (1.01 * norm_sq);
  }
  const auto eval = [&](const Vector& x) {
    const Vector r = A.apply(x) - b;
    return SmoothEval{0.5 * r.squaredNorm(), A.apply_adjoint(r)};
  };
  SolveReport rep = prox_gradient_loop(eval, A.cols(), reg, lambda, step, opts, "prox_grad");
  rep.x = rep.w;
  return rep;
}

SolveReport std_prox_grad(const Matrix& A, const Vector& b, const Regularizer& reg, double lambda,
                          const SolverOptions& opts) {
  return std_prox_grad(DenseOperator(A), b, reg, lambda, opts);
}

SolveReport std_prox_grad(const Matrix& A, const LinearOperator& C, const Vector& b, const Regularizer& reg,
                          double lambda, const SolverOptions& opts) {
  if (!C.is_identity())
    throw std::invalid_argument(
        "std_prox_grad: prox of R(Cx) has no closed form for C != I; build a RelaxedSystem and use sr3_prox_grad");
  return std_prox_grad(A, b, reg, lambda, opts);
}

SolveReport admm_lasso(const Matrix& A, const Vector& b, double lambda, const SolverOptions& opts, double rho) {
  check_common(lambda, opts);
  if (!(rho > 0.0)) throw std::invalid_argument("admm_lasso: rho must be positive");
  if (A.rows() != b.size()) throw std::invalid_argument("admm_lasso: A and b disagree in row count");
  const auto start = std::chrono::steady_clock::now();
  const Index d = A.cols();

  Matrix system = A.transpose() * A;
  system.diagonal().array() += rho;
  const Eigen::LLT<Matrix> factor(system);
  if (factor.info() != Eigen::Success) throw NumericalError("admm_lasso: factorization failed");
  const Vector Atb = A.transpose() * b;

  SolveReport rep;
  rep.method = "admm";
  rep.step = rho;
  rep.initial = starting_point(opts, d);
  Vector x = rep.initial, z = rep.initial, u = Vector::Zero(d);
  const auto loss_at = [&](const Vector& v) { return penalized(0.5 * (A * v - b).squaredNorm(), lambda, v.lpNorm<1>()); };
  double loss = loss_at(z);
  if (opts.record_history) rep.loss_history.push_back(loss);
  if (opts.record_iterates) rep.iterates.push_back(z);

  for (int k = 1; k <= opts.max_iters; ++k) {
    const Vector x_next = factor.solve(Atb + rho * (z - u));
    z = prox::prox_l1(x_next + u, lambda / rho);
    u += x_next - z;
    loss = loss_at(z);
    rep.iterations = k;
    if (opts.record_history) rep.loss_history.push_back(loss);
    if (opts.record_iterates) rep.iterates.push_back(z);
    const bool done = stopped(x_next, x, opts.tol);
    x = x_next;
    if (done) {
      rep.converged = true;
      break;
    }
  }
  rep.w = std::move(z);
  rep.x = std::move(x);
  rep.final_loss = loss;
  rep.wall_time = seconds_since(start);
  return rep;
}

// ---------------------------------------------------------------------------

std::optional<double> stationarity_distance(const Regularizer& reg, double lambda, const Vector& point,
                                            const Vector& g) {
  if (point.size() != g.size()) throw std::invalid_argument("stationarity_distance: size mismatch");
  constexpr double inf = std::numeric_limits<double>::infinity();
  const auto sq = [](double v) { return v * v; };
  double total = 0.0;
  using namespace prox;
  const bool handled = std::visit(
      [&](const auto& kind) -> bool {
        using K = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<K, L1>) {
          for (Index i = 0; i < point.size(); ++i)
            total += point[i] != 0.0 ? sq(g[i] + lambda * (point[i] > 0 ? 1.0 : -1.0))
                                     : sq(std::max(std::abs(g[i]) - lambda, 0.0));
        } else if constexpr (std::is_same_v<K, L0>) {
          // Limiting subdifferential of |.|_0 is {0} off zero and R at zero.
          for (Index i = 0; i < point.size(); ++i)
            if (point[i] != 0.0) total += sq(g[i]);
        } else if constexpr (std::is_same_v<K, Lp>) {
          for (Index i = 0; i < point.size(); ++i)
            if (point[i] != 0.0)
              total += sq(g[i] + lambda * kind.p * std::pow(std::abs(point[i]), kind.p - 1.0) *
                                     (point[i] > 0 ? 1.0 : -1.0));
        } else if constexpr (std::is_same_v<K, Cad>) {
          for (Index i = 0; i < point.size(); ++i) {
            const double a = std::abs(point[i]);
            const double s = point[i] > 0 ? 1.0 : -1.0;
            if (a == 0.0)
              total += sq(std::max(std::abs(g[i]) - lambda, 0.0));
            else if (a < kind.rho)
              total += sq(g[i] + lambda * s);
            else if (a > kind.rho)
              total += sq(g[i]);
            else  // both one-sided derivatives are limiting subgradients
              total += std::min(sq(g[i]), sq(g[i] + lambda * s));
          }
        } else if constexpr (std::is_same_v<K, GroupL2>) {
          for (Index grp = 0; grp < kind.groups.count(); ++grp) {
            double norm_sq = 0.0, grad_sq = 0.0;
            for (const Index* i = kind.groups.group_begin(grp); i != kind.groups.group_end(grp); ++i) {
              norm_sq += sq(point[*i]);
              grad_sq += sq(g[*i]);
            }
            if (norm_sq == 0.0) {
              total += sq(std::max(std::sqrt(grad_sq) - lambda, 0.0));
            } else {
              const double norm = std::sqrt(norm_sq);
              for (const Index* i = kind.groups.group_begin(grp); i != kind.groups.group_end(grp); ++i)
                total += sq(g[*i] + lambda * point[*i] / norm);
            }
          }
        } else if constexpr (std::is_same_v<K, SqL2>) {
          total = (g + lambda * point).squaredNorm();
        } else if constexpr (std::is_same_v<K, IndicatorSet>) {
          if (const auto* sphere = std::get_if<Sphere>(&kind.set)) {
            const double norm = point.norm();
            if (std::abs(norm - sphere->radius) > 1e-9 * (1.0 + sphere->radius)) {
              total = inf;
            } else {
              const Vector u = point / norm;
              total = (g - g.dot(u) * u).squaredNorm();
            }
          } else {
            for (Index i = 0; i < point.size(); ++i) {
              if (point[i] < 0.0) total = inf;
              else if (point[i] > 0.0) total += sq(g[i]);
              else total += sq(std::max(-g[i], 0.0));
            }
          }
        } else {
          return false;
        }
        return true;
      },
      reg.kind());
  if (!handled) return std::nullopt;
  return std::sqrt(total);
}

std::optional<double> stationarity_residual(const Matrix& A, const Vector& b, const Regularizer& reg, double lambda,
                                            const Vector& x) {
  return stationarity_distance(reg, lambda, x, A.transpose() * (A * x - b));
}

std::optional<double> stationarity_residual(const RelaxedModel& model, const Regularizer& reg, double lambda,
                                            const Vector& w) {
  return stationarity_distance(reg, lambda, w, model.value_grad(w).grad);
}

// ---------------------------------------------------------------------------

namespace {

bool within(double value, double bound, RateCertificate& cert) {
  const double slack = kCertificateSlack * std::max(1.0, std::abs(bound));
  if (std::abs(value - bound) <= slack) ++cert.near_bound;
  return value <= bound + slack;
}

// Shared bookkeeping once p*, w*, L and mu are known.
void check_rates(const SolveReport& rep, bool convex, const Vector& w_star, double p_star, double mu,
                 RateCertificate& cert) {
  const double L = 1.0 / rep.step;
  cert.lipschitz = L;
  cert.strong_convexity = mu;
  cert.p_star = p_star;
  const auto& loss = rep.loss_history;
  const auto& v = rep.stationarity_history;
  if (loss.empty() || v.size() + 1 != loss.size()) {
    cert.notes.push_back("history not recorded; no certificate evaluated");
    return;
  }

  cert.sublinear_checked = true;
  const double factor = convex ? 1.0 : 2.0;
  double running = 0.0;
  for (std::size_t N = 1; N <= v.size(); ++N) {
    running += v[N - 1] * v[N - 1];
    const double n = static_cast<double>(N);
    if (!within(running / n, factor * L / n * (loss[0] - p_star), cert)) ++cert.sublinear_violations;
  }
  if (!convex) {
    cert.notes.push_back("nonconvex regularizer: only the averaged stationarity bound applies");
    return;
  }

  cert.gap_checked = true;
  const double dist0 = (rep.initial - w_star).squaredNorm();
  for (std::size_t k = 1; k < loss.size(); ++k)
    if (!within(loss[k] - p_star, L * dist0 / (2.0 * static_cast<double>(k)), cert)) ++cert.gap_violations;

  if (!(mu > 0.0)) {
    cert.notes.push_back("rank-deficient data operator: linear rate not applicable");
    return;
  }
  if (rep.iterates.size() != loss.size()) {
    cert.notes.push_back("iterates not recorded: linear rate skipped");
    return;
  }
  cert.linear_checked = true;
  cert.contraction = 1.0 - mu / L;
  double factor_k = 1.0;
  for (std::size_t k = 1; k < rep.iterates.size(); ++k) {
    factor_k *= cert.contraction;
    if (!within((rep.iterates[k] - w_star).squaredNorm(), factor_k * dist0, cert)) ++cert.linear_violations;
  }
}

SolverOptions reference_options(const SolveReport& rep) {
  SolverOptions ref;
  ref.step = rep.step;
  ref.tol = 1e-15;
  ref.max_iters = 500000;
  ref.record_history = false;
  ref.initial = rep.w;
  return ref;
}

double min_loss(const SolveReport& rep) {
  double m = std::numeric_limits<double>::infinity();
  for (double v : rep.loss_history) m = std::min(m, v);
  return m;
}

}  // namespace

RateCertificate rate_certificates(const SolveReport& report, const RelaxedSystem& sys, const Regularizer& reg,
                                  double lambda) {
  RateCertificate cert;
  const bool convex = reg.is_convex();
  if (!convex) {
    check_rates(report, false, report.w, min_loss(report), 0.0, cert);
    return cert;
  }
  const SolveReport ref = sr3_prox_grad(sys, reg, lambda, reference_options(report));
  const double p_star = std::min(ref.final_loss, min_loss(report));

  double mu = 0.0;
  if (sys.identity_C()) {
    Vector s = Vector::Zero(sys.x_size());
    const Vector sv = Eigen::BDCSVD<Matrix>(sys.A()).singularValues();
    s.head(sv.size()) = sv;
    const double smin_sq = s[s.size() - 1] * s[s.size() - 1];
    mu = smin_sq / (1.0 + smin_sq / sys.kappa());
  } else {
    const auto F = sys.form_F_explicit().F;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(F.transpose() * F, Eigen::EigenvaluesOnly);
    mu = std::max(eig.eigenvalues().minCoeff(), 0.0);
  }
  check_rates(report, true, ref.w, p_star, mu, cert);
  return cert;
}

RateCertificate rate_certificates(const SolveReport& report, const Matrix& A, const Vector& b, const Regularizer& reg,
                                  double lambda) {
  RateCertificate cert;
  const bool convex = reg.is_convex();
  if (!convex) {
    check_rates(report, false, report.w, min_loss(report), 0.0, cert);
    return cert;
  }
  const SolveReport ref = std_prox_grad(A, b, reg, lambda, reference_options(report));
  const double p_star = std::min(ref.final_loss, min_loss(report));
  Vector s = Vector::Zero(A.cols());
  const Vector sv = Eigen::BDCSVD<Matrix>(A).singularValues();
  s.head(sv.size()) = sv;
  const double mu = s[s.size() - 1] * s[s.size() - 1];
  check_rates(report, true, ref.w, p_star, mu, cert);
  return cert;
}

}  // namespace sr3
