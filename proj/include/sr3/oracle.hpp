#pragma once

// Brute-force references used to certify the production operators.  Nothing
// here calls into the prox, relax or solve modules: penalties are evaluated by
// their own code and minimized by exhaustive search.

#include <sr3/types.hpp>

#include <functional>
#include <string>

namespace sr3::oracle {

struct OracleResult {
  Vector argmin;
  double objective = 0.0;
  std::string method;
};

/// Scalar penalty r(x) described independently of prox::Regularizer.
struct Penalty {
  enum class Kind { L1, L0, Lp, Cad, SqL2, Nonnegative };
  Kind kind = Kind::L1;
  double param = 0.0;  // p for Lp, rho for Cad

  double operator()(double x) const;
};

/// argmin_x 0.5 (x - z)^2 + alpha r(x) over [-|z|-1, |z|+1]: uniform grid
/// search with step `grid_step` (grid points are integer multiples of the
/// step, so 0 is always sampled), the kink candidates {0, +-rho, z}, and a
/// golden-section polish of the best grid cell down to a 1e-10 bracket.
OracleResult grid_prox(const Penalty& penalty, double z, double alpha, double grid_step = 1e-6);

/// Group-l2 prox of y by grid search on the radial problem
/// min_{t >= 0} 0.5 (t - |y|)^2 + alpha t, scaled back along y.
OracleResult grid_prox_group(const Vector& y, double alpha, double grid_step = 1e-6);

/// Projection of a 2-vector onto the circle of radius r by an angle grid.
OracleResult grid_project_circle(const Vector& y, double radius, double grid_step = 1e-6);

/// Global minimizer of 0.5 |Ax - b|^2 + lambda |x|_0 by enumerating all 2^d
/// supports (d <= 15) and solving the restricted least-squares problems.
/// `argmin` holds the minimizer; ties keep the smaller support.
OracleResult exhaustive_l0(const Matrix& A, const Vector& b, double lambda);

/// Central finite differences of f at w.
Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& w, double h = 1e-6);

}  // namespace sr3::oracle
