#pragma once

// The kappa-relaxation
//
//   min_{x,w} 0.5 |Ax - b|^2 + lambda R(w) + kappa/2 |Cx - w|^2
//
// with x minimized out in closed form, x(w) = H^{-1}(A^T b + kappa C^T w),
// H = A^T A + kappa C^T C.  What remains is the least-squares value function
// v(w) = 0.5 |F w - g|^2 whose gradient kappa (w - C x(w)) needs only one
// solve with the cached factorization of H.

#include <sr3/operators.hpp>
#include <sr3/types.hpp>

#include <Eigen/Cholesky>

#include <optional>
#include <string>

namespace sr3 {

class RelaxedModel {
 public:
  struct ValueGrad {
    double value = 0.0;
    Vector grad;
    Vector x;
  };

  virtual ~RelaxedModel() = default;
  virtual double kappa() const = 0;
  virtual Index x_size() const = 0;
  virtual Index w_size() const = 0;
  virtual Vector solve_x(const Vector& w) const = 0;
  virtual Vector apply_C(const Vector& x) const = 0;
  /// 0.5 |A x - b|^2.
  virtual double data_misfit(const Vector& x) const = 0;

  /// v(w) = 0.5 |A x(w) - b|^2 + kappa/2 |C x(w) - w|^2 and its gradient
  /// kappa (w - C x(w)), together with x(w).
  ValueGrad value_grad(const Vector& w) const;

  /// |F^T g|_inf = |grad v(0)|_inf: the smallest lambda for which w = 0 is a
  /// fixed point of the l1 prox-gradient map.
  double lambda_max_l1() const;
};

struct ExplicitValueFunction {
  Matrix F;
  Vector g;
};

struct SpectralReport {
  /// Singular values of F, descending.
  Vector singular_values;
  /// Prediction from the closed-form relations (empty when only the general
  /// sandwich bounds apply).
  Vector predicted;
  double cond_F = 0.0;
  double cond_A = 0.0;
  double predicted_cond_F = 0.0;
  double max_relative_deviation = 0.0;
  /// Bounds lambda_min(F^T F) >= lower_bound and lambda_max(F^T F) <= kappa.
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  /// "identity", "tight_frame" or "general".
  std::string structure;
};

struct OptimalRatio {
  /// tau = lambda_relaxed / lambda_original minimizing |tau I - kappa H^{-1}|_2.
  double tau = 0.0;
  /// Distance-to-stationarity coefficient (s_max^2 - s_min^2) / (s_max^2 + s_min^2 + 2 kappa).
  double coefficient = 0.0;
};

class RelaxedSystem final : public RelaxedModel {
 public:
  /// Factorizes H = A^T A + kappa C^T C once.  Throws std::invalid_argument
  /// on bad dimensions or kappa <= 0 and NumericalError when the smallest
  /// pivot is below 1e-12 times the largest.
  static RelaxedSystem build(Matrix A, OperatorPtr C, Vector b, double kappa);
  /// C = I.
  static RelaxedSystem build(Matrix A, Vector b, double kappa);

  double kappa() const override { return kappa_; }
  Index x_size() const override { return A_.cols(); }
  Index w_size() const override { return C_->rows(); }
  Vector solve_x(const Vector& w) const override;
  Vector apply_C(const Vector& x) const override { return C_->apply(x); }
  double data_misfit(const Vector& x) const override;

  const Matrix& A() const { return A_; }
  const Vector& b() const { return b_; }
  const LinearOperator& C() const { return *C_; }
  const OperatorPtr& C_ptr() const { return C_; }
  const Matrix& H() const { return H_; }
  const Vector& Atb() const { return Atb_; }
  bool identity_C() const { return C_->is_identity(); }

  /// |H x - (A^T b + kappa C^T w)| / |rhs| for the x returned by solve_x.
  double solve_residual(const Vector& w) const;

  /// Explicit F and g; refuses when (m + n) * n exceeds 1e7 entries.
  ExplicitValueFunction form_F_explicit() const;
  SpectralReport spectral_report() const;
  /// Requires C = I.
  OptimalRatio optimal_ratio() const;

 private:
  RelaxedSystem() = default;
  Matrix A_;
  OperatorPtr C_;
  Vector b_;
  double kappa_ = 0.0;
  Matrix H_;
  Eigen::LDLT<Matrix> factor_;
  Vector Atb_;
};

/// Relaxed matrix completion with A an entry mask and C = I.  H is diagonal
/// (mask + kappa), so x(w) is an elementwise average of data and w.
class MaskedCompletionSystem final : public RelaxedModel {
 public:
  MaskedCompletionSystem(Eigen::ArrayXd mask, Vector observed, double kappa);

  double kappa() const override { return kappa_; }
  Index x_size() const override { return mask_.size(); }
  Index w_size() const override { return mask_.size(); }
  Vector solve_x(const Vector& w) const override;
  Vector apply_C(const Vector& x) const override { return x; }
  double data_misfit(const Vector& x) const override;

  const Eigen::ArrayXd& mask() const { return mask_; }
  const Vector& observed() const { return observed_; }

 private:
  Eigen::ArrayXd mask_;
  Vector observed_;
  double kappa_;
};

}  // namespace sr3
