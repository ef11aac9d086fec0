#include <sr3/relax.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace sr3 {

namespace {

constexpr double kPivotRatio = 1e-12;
constexpr double kExplicitEntryLimit = 1e7;

// Singular values of A padded with zeros to A.cols(), descending.
Vector padded_singular_values(const Matrix& A) {
  Vector s = Vector::Zero(A.cols());
  if (A.rows() > 0 && A.cols() > 0) {
    Eigen::BDCSVD<Matrix> svd(A);
    const Vector sv = svd.singularValues();
    s.head(sv.size()) = sv;
  }
  return s;
}

double condition(const Vector& s_desc) {
  const double lo = s_desc[s_desc.size() - 1];
  return lo > 0.0 ? s_desc[0] / lo : std::numeric_limits<double>::infinity();
}

}  // namespace

RelaxedModel::ValueGrad RelaxedModel::value_grad(const Vector& w) const {
  if (w.size() != w_size()) throw std::invalid_argument("value_grad: w has the wrong length");
  ValueGrad out;
  out.x = solve_x(w);
  const Vector residual = apply_C(out.x) - w;
  out.value = data_misfit(out.x) + 0.5 * kappa() * residual.squaredNorm();
  out.grad = -kappa() * residual;
  return out;
}

double RelaxedModel::lambda_max_l1() const {
  return value_grad(Vector::Zero(w_size())).grad.lpNorm<Eigen::Infinity>();
}

// ---------------------------------------------------------------------------

RelaxedSystem RelaxedSystem::build(Matrix A, Vector b, double kappa) {
  const Index d = A.cols();
  return build(std::move(A), std::make_shared<IdentityOperator>(d), std::move(b), kappa);
}

RelaxedSystem RelaxedSystem::build(Matrix A, OperatorPtr C, Vector b, double kappa) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw std::invalid_argument("RelaxedSystem: kappa must be positive");
  if (!C) throw std::invalid_argument("RelaxedSystem: missing composition map");
  if (A.rows() != b.size()) throw std::invalid_argument("RelaxedSystem: A and b disagree in row count");
  if (C->cols() != A.cols()) throw std::invalid_argument("RelaxedSystem: A and C disagree in column count");
  if (A.cols() == 0) throw std::invalid_argument("RelaxedSystem: empty problem");

  RelaxedSystem sys;
  sys.kappa_ = kappa;
  sys.H_ = A.transpose() * A;
  sys.H_ += kappa * C->gram();
  sys.factor_.compute(sys.H_);
  const Vector pivots = sys.factor_.vectorD();
  const double largest = pivots.cwiseAbs().maxCoeff();
  const double smallest = pivots.minCoeff();
  if (sys.factor_.info() != Eigen::Success || !(largest > 0.0) || smallest <= kPivotRatio * largest) {
    std::ostringstream msg;
    msg << "RelaxedSystem: H = A^T A + kappa C^T C is numerically singular (smallest pivot " << smallest
        << ", largest " << largest << ")";
    throw NumericalError(msg.str());
  }
  sys.Atb_ = A.transpose() * b;
  sys.A_ = std::move(A);
  sys.C_ = std::move(C);
  sys.b_ = std::move(b);
  return sys;
}

Vector RelaxedSystem::solve_x(const Vector& w) const {
  if (w.size() != w_size()) throw std::invalid_argument("solve_x: w has the wrong length");
  return factor_.solve(Atb_ + kappa_ * C_->apply_adjoint(w));
}

double RelaxedSystem::data_misfit(const Vector& x) const { return 0.5 * (A_ * x - b_).squaredNorm(); }

double RelaxedSystem::solve_residual(const Vector& w) const {
  const Vector rhs = Atb_ + kappa_ * C_->apply_adjoint(w);
  const Vector x = factor_.solve(rhs);
  const double scale = rhs.norm();
  return (H_ * x - rhs).norm() / (scale > 0.0 ? scale : 1.0);
}

ExplicitValueFunction RelaxedSystem::form_F_explicit() const {
  const Index m = A_.rows(), n = w_size();
  if (static_cast<double>(m + n) * static_cast<double>(n) > kExplicitEntryLimit)
    throw std::invalid_argument("form_F_explicit: system too large to form explicitly");
  const Matrix Ct = C_->dense().transpose();
  const Matrix HinvCt = factor_.solve(Ct);  // d x n
  const Vector HinvAtb = factor_.solve(Atb_);
  const double root = std::sqrt(kappa_);

  ExplicitValueFunction out;
  out.F.resize(m + n, n);
  out.F.topRows(m) = kappa_ * (A_ * HinvCt);
  out.F.bottomRows(n) = -root * kappa_ * (Ct.transpose() * HinvCt);
  out.F.bottomRows(n).diagonal().array() += root;
  out.g.resize(m + n);
  out.g.head(m) = b_ - A_ * HinvAtb;
  out.g.tail(n) = root * C_->apply(HinvAtb);
  return out;
}

SpectralReport RelaxedSystem::spectral_report() const {
  const auto explicit_vf = form_F_explicit();
  const Index n = w_size(), d = x_size();
  SpectralReport rep;
  Eigen::BDCSVD<Matrix> svd(explicit_vf.F);
  rep.singular_values = svd.singularValues();
  rep.cond_F = condition(rep.singular_values);

  const Vector sA = padded_singular_values(A_);
  rep.cond_A = condition(sA);
  const double kappa = kappa_;
  const double smax = sA[0], smin = sA[d - 1];

  const Matrix gram = C_->gram();
  const bool tight = (gram - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() <= 1e-10;
  const auto shrink = [&](double s) { return std::sqrt(kappa) * s / std::sqrt(kappa + s * s); };

  if (C_->is_identity() || (tight && n == d)) {
    rep.structure = C_->is_identity() ? "identity" : "tight_frame";
    rep.predicted = sA.unaryExpr(shrink);
    rep.predicted_cond_F = rep.cond_A * std::sqrt((kappa + smin * smin) / (kappa + smax * smax));
  } else if (tight) {
    rep.structure = "tight_frame";
    rep.predicted.resize(n);
    rep.predicted.head(n - d).setConstant(std::sqrt(kappa));
    rep.predicted.tail(d) = sA.unaryExpr(shrink);
    rep.predicted_cond_F = rep.cond_A * std::sqrt((kappa + smin * smin) / (smax * smax));
  } else {
    rep.structure = "general";
    rep.predicted_cond_F = std::numeric_limits<double>::quiet_NaN();
  }

  if (rep.predicted.size() > 0) {
    // Values predicted to vanish are compared on the scale of the largest.
    const double top = rep.predicted.maxCoeff();
    for (Index i = 0; i < n; ++i) {
      const double p = rep.predicted[i];
      const double dev = std::abs(rep.singular_values[i] - p) / (p >= 1e-6 * top ? p : top);
      rep.max_relative_deviation = std::max(rep.max_relative_deviation, dev);
    }
  }

  rep.upper_bound = kappa;
  if (n >= d) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    const double cmax = eig.eigenvalues().maxCoeff();
    const double cmin = eig.eigenvalues().minCoeff();
    if (cmin > 1e-12 * cmax) {
      const double amin = smin * smin;
      rep.lower_bound = (amin / cmax) / (1.0 + amin / (kappa * cmax));
    }
  }
  return rep;
}

OptimalRatio RelaxedSystem::optimal_ratio() const {
  if (!C_->is_identity()) throw std::invalid_argument("optimal_ratio: requires C = I");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(H_, Eigen::EigenvaluesOnly);
  const double hmin = eig.eigenvalues().minCoeff();
  const double hmax = eig.eigenvalues().maxCoeff();
  OptimalRatio out;
  out.tau = 0.5 * kappa_ * (1.0 / hmax + 1.0 / hmin);
  out.coefficient = (hmax - hmin) / (hmax + hmin);
  return out;
}

// ---------------------------------------------------------------------------

MaskedCompletionSystem::MaskedCompletionSystem(Eigen::ArrayXd mask, Vector observed, double kappa)
    : mask_(std::move(mask)), observed_(std::move(observed)), kappa_(kappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("MaskedCompletionSystem: kappa must be positive");
  if (mask_.size() != observed_.size()) throw std::invalid_argument("MaskedCompletionSystem: size mismatch");
  if (((mask_ != 0.0) && (mask_ != 1.0)).any()) throw std::invalid_argument("MaskedCompletionSystem: mask must be 0/1");
  if ((mask_ == 0.0).all()) throw std::invalid_argument("MaskedCompletionSystem: empty mask");
  observed_ = (observed_.array() * mask_).matrix();
}

Vector MaskedCompletionSystem::solve_x(const Vector& w) const {
  if (w.size() != w_size()) throw std::invalid_argument("solve_x: w has the wrong length");
  return ((observed_.array() + kappa_ * w.array()) / (mask_ + kappa_)).matrix();
}

double MaskedCompletionSystem::data_misfit(const Vector& x) const {
  return 0.5 * ((x.array() * mask_).matrix() - observed_).squaredNorm();
}

}  // namespace sr3
