#pragma once

// Proximal solvers for the relaxed value function and for the original
// regularized least-squares problem, plus stationarity and rate diagnostics.

#include <sr3/operators.hpp>
#include <sr3/prox.hpp>
#include <sr3/relax.hpp>

#include <optional>
#include <string>
#include <vector>

namespace sr3 {

struct SolverOptions {
  /// Step size; unset selects 1/kappa (relaxed solvers) or 1/(1.01 |A|^2)
  /// with |A|^2 from 100 power iterations (standard prox-gradient).
  std::optional<double> step;
  int max_iters = 10000;
  /// Stop when |w_k - w_{k-1}| <= tol (1 + |w_k|).
  double tol = 1e-5;
  bool record_history = true;
  /// Keep every iterate (needed for the linear-rate certificate).
  bool record_iterates = false;
  /// Starting point; zero when unset.
  std::optional<Vector> initial;
};

struct SolveReport {
  std::string method;
  /// Regularized variable (w for relaxed solvers, x for standard ones).
  Vector w;
  /// Signal estimate x(w) for relaxed solvers; equals w otherwise (ADMM
  /// reports its least-squares block here).
  Vector x;
  Vector initial;
  int iterations = 0;
  bool converged = false;
  /// The loss rose above ten times the best loss seen.
  bool diverged = false;
  double step = 0.0;
  /// Objective at w_0, w_1, ..., w_iterations.
  std::vector<double> loss_history;
  /// |v_k| for k = 1..iterations, where v_k is the subgradient certificate
  /// (1/step)(w_{k-1} - w_k) + grad f(w_k) - grad f(w_{k-1}).
  std::vector<double> stationarity_history;
  std::vector<Vector> iterates;
  /// Iteration whose loss was smallest; nonconvex runs return that iterate.
  int best_iteration = 0;
  double final_loss = 0.0;
  double wall_time = 0.0;  // seconds
};

/// Algorithm: w <- prox_{eta lambda R}(w - eta grad v(w)).
SolveReport sr3_prox_grad(const RelaxedModel& model, const prox::Regularizer& reg, double lambda,
                          const SolverOptions& opts = {});

/// a_k = (1 + sqrt(1 + 4 a_{k-1}^2)) / 2, starting from a_0 = 1.
double fista_next_momentum(double a_prev);

/// Accelerated variant with the FISTA momentum sequence; convex R only.
SolveReport sr3_fista(const RelaxedModel& model, const prox::Regularizer& reg, double lambda,
                      const SolverOptions& opts = {});

/// Prox-gradient on 0.5 |Ax - b|^2 + lambda R(x).
SolveReport std_prox_grad(const LinearOperator& A, const Vector& b, const prox::Regularizer& reg, double lambda,
                          const SolverOptions& opts = {});
SolveReport std_prox_grad(const Matrix& A, const Vector& b, const prox::Regularizer& reg, double lambda,
                          const SolverOptions& opts = {});
/// The composite prox of R(C x) has no closed form for general C; anything
/// other than the identity is rejected.
SolveReport std_prox_grad(const Matrix& A, const LinearOperator& C, const Vector& b, const prox::Regularizer& reg,
                          double lambda, const SolverOptions& opts = {});

/// Scaled-form ADMM for the lasso with a single factorization of A^T A + rho I.
SolveReport admm_lasso(const Matrix& A, const Vector& b, double lambda, const SolverOptions& opts = {},
                       double rho = 1.0);

/// dist(0, grad + lambda dR(point)) in closed form; nullopt for penalties
/// without one (singular values), whose convergence is judged from the
/// iterate history only.
std::optional<double> stationarity_distance(const prox::Regularizer& reg, double lambda, const Vector& point,
                                            const Vector& smooth_grad);
/// Stationarity of x for 0.5 |Ax - b|^2 + lambda R(x).
std::optional<double> stationarity_residual(const Matrix& A, const Vector& b, const prox::Regularizer& reg,
                                            double lambda, const Vector& x);
/// Stationarity of w for v(w) + lambda R(w) (x = x(w) satisfies its own
/// condition exactly).
std::optional<double> stationarity_residual(const RelaxedModel& model, const prox::Regularizer& reg, double lambda,
                                            const Vector& w);

struct RateCertificate {
  bool sublinear_checked = false;
  bool gap_checked = false;
  bool linear_checked = false;
  int sublinear_violations = 0;
  int gap_violations = 0;
  int linear_violations = 0;
  /// Points where the observed value sits within 1e-12 of its bound.
  int near_bound = 0;
  double lipschitz = 0.0;       // 1/step
  double strong_convexity = 0.0;
  double contraction = 1.0;     // 1 - step * strong_convexity
  double p_star = 0.0;
  std::vector<std::string> notes;

  bool ok() const { return sublinear_violations + gap_violations + linear_violations == 0; }
};

/// Checks the recorded run of sr3_prox_grad against
///  (a) (1/N) sum |v_k|^2 <= (c L / N)(p(w_0) - p*), c = 1 for convex R and 2 otherwise,
///  (b) p(w_k) - p* <= L |w_0 - w*|^2 / (2k) for convex R,
///  (c) |w_k - w*|^2 <= (1 - mu/L)^k |w_0 - w*|^2 for convex R when mu > 0,
/// with L = 1/step and mu = lambda_min(F^T F).  p* and w* come from a long
/// reference solve.
RateCertificate rate_certificates(const SolveReport& report, const RelaxedSystem& sys, const prox::Regularizer& reg,
                                  double lambda);
/// The same checks for std_prox_grad with mu = sigma_min(A)^2.
RateCertificate rate_certificates(const SolveReport& report, const Matrix& A, const Vector& b,
                                  const prox::Regularizer& reg, double lambda);

/// Objective of the relaxed problem, v(w) + lambda R(w).
double relaxed_objective(const RelaxedModel& model, const prox::Regularizer& reg, double lambda, const Vector& w);

}  // namespace sr3
