#pragma once

// Linear maps used as A (data operator) or C (composition map).  Every
// operator applies itself matrix-free and can also build an explicit dense
// matrix through an independent construction, which the tests compare
// against the matrix-free path.

#include <sr3/types.hpp>

#include <Eigen/SparseCore>

#include <complex>
#include <cstdint>
#include <memory>
#include <vector>

namespace sr3 {

namespace detail {
class RealFft2D;
}

using SparseMatrix = Eigen::SparseMatrix<double>;

class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual Index rows() const = 0;
  virtual Index cols() const = 0;
  virtual Vector apply(const Vector& x) const = 0;
  virtual Vector apply_adjoint(const Vector& y) const = 0;
  /// Explicit matrix built from the operator's definition, not by probing.
  virtual Matrix dense() const = 0;
  /// C^T C as a dense matrix.
  virtual Matrix gram() const;
  virtual bool is_identity() const { return false; }
};

using OperatorPtr = std::shared_ptr<const LinearOperator>;

class IdentityOperator final : public LinearOperator {
 public:
  explicit IdentityOperator(Index n);
  Index rows() const override { return n_; }
  Index cols() const override { return n_; }
  Vector apply(const Vector& x) const override;
  Vector apply_adjoint(const Vector& y) const override { return apply(y); }
  Matrix dense() const override { return Matrix::Identity(n_, n_); }
  Matrix gram() const override { return dense(); }
  bool is_identity() const override { return true; }

 private:
  Index n_;
};

class DenseOperator final : public LinearOperator {
 public:
  explicit DenseOperator(Matrix m) : m_(std::move(m)) {}
  Index rows() const override { return m_.rows(); }
  Index cols() const override { return m_.cols(); }
  Vector apply(const Vector& x) const override;
  Vector apply_adjoint(const Vector& y) const override;
  Matrix dense() const override { return m_; }
  Matrix gram() const override;
  const Matrix& matrix() const { return m_; }

 private:
  Matrix m_;
};

class SparseOperator final : public LinearOperator {
 public:
  explicit SparseOperator(SparseMatrix m);
  Index rows() const override { return m_.rows(); }
  Index cols() const override { return m_.cols(); }
  Vector apply(const Vector& x) const override;
  Vector apply_adjoint(const Vector& y) const override;
  Matrix dense() const override { return Matrix(m_); }
  Matrix gram() const override;
  const SparseMatrix& matrix() const { return m_; }

 private:
  SparseMatrix m_;
};

/// diag(A_1, ..., A_k) acting on stacked blocks.
class BlockDiagonalOperator final : public LinearOperator {
 public:
  explicit BlockDiagonalOperator(std::vector<Matrix> blocks);
  Index rows() const override { return rows_; }
  Index cols() const override { return cols_; }
  Vector apply(const Vector& x) const override;
  Vector apply_adjoint(const Vector& y) const override;
  Matrix dense() const override;
  const std::vector<Matrix>& blocks() const { return blocks_; }

 private:
  std::vector<Matrix> blocks_;
  Index rows_ = 0, cols_ = 0;
};

/// Entrywise sampling: (P x)_i = mask_i x_i, kept square so that P^T P is
/// the diagonal mask itself.
class EntryMaskOperator final : public LinearOperator {
 public:
  explicit EntryMaskOperator(Eigen::ArrayXd mask);
  Index rows() const override { return mask_.size(); }
  Index cols() const override { return mask_.size(); }
  Vector apply(const Vector& x) const override;
  Vector apply_adjoint(const Vector& y) const override { return apply(y); }
  Matrix dense() const override;
  const Eigen::ArrayXd& mask() const { return mask_; }

 private:
  Eigen::ArrayXd mask_;
};

/// Images are rows x cols matrices flattened column-major.  Index arithmetic
/// is doubly periodic.
struct ImageShape {
  Index rows = 0;
  Index cols = 0;
  Index size() const { return rows * cols; }
  bool operator==(const ImageShape&) const = default;
};

/// Y = K * X with Y_ij = sum_pq K_pq X_{i-p, j-q}, evaluated through 2-D FFTs.
/// `kernel` is an image-sized array whose (0,0) entry is the kernel centre.
class CircularConvolution2D final : public LinearOperator {
 public:
  explicit CircularConvolution2D(Matrix kernel);
  Index rows() const override { return shape_.size(); }
  Index cols() const override { return shape_.size(); }
  Vector apply(const Vector& x) const override;
  Vector apply_adjoint(const Vector& y) const override;
  /// Direct-sum construction of the (block-circulant) matrix.
  Matrix dense() const override;
  const ImageShape& shape() const { return shape_; }
  const Matrix& kernel() const { return kernel_; }

 private:
  Matrix kernel_;
  ImageShape shape_;
  std::vector<std::complex<double>> symbol_;  // half spectrum
  std::shared_ptr<const detail::RealFft2D> fft_;
};

/// [D_x; D_y] with [D_x X]_ij = X_{i+1,j} - X_ij, [D_y X]_ij = X_{i,j+1} - X_ij.
class PeriodicGradient2D final : public LinearOperator {
 public:
  explicit PeriodicGradient2D(ImageShape shape) : shape_(shape) {}
  Index rows() const override { return 2 * shape_.size(); }
  Index cols() const override { return shape_.size(); }
  Vector apply(const Vector& x) const override;
  Vector apply_adjoint(const Vector& y) const override;
  Matrix dense() const override;
  const ImageShape& shape() const { return shape_; }

 private:
  ImageShape shape_;
};

/// Gaussian blur kernel exp(-(i^2 + j^2) / (2 sigma^2)) for |i|, |j| < halfwidth,
/// wrapped onto an image-sized array (unnormalized).
Matrix gaussian_blur_kernel(ImageShape shape, double sigma, Index halfwidth);

/// (d-1) x d forward differences, row i = e_{i+1} - e_i.
SparseMatrix forward_difference_1d(Index d);

/// Stack of D_ij = [0 .. I .. -I .. 0] blocks over all task pairs i < j
/// (lexicographic order) for k tasks of dimension n.
SparseMatrix pairwise_difference(Index tasks, Index n);

/// Estimate of |A|_2^2 by power iteration on A^T A from a fixed-seed start.
double estimate_squared_norm(const LinearOperator& A, int iterations = 100, std::uint64_t seed = 0x5eed);

}  // namespace sr3
