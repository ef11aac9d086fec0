#include <sr3/operators.hpp>

#include "fft.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace sr3 {

namespace {

void check_size(const char* who, Index expected, Index got) {
  if (expected != got)
    throw std::invalid_argument(std::string(who) + ": expected length " + std::to_string(expected) + ", got " +
                                std::to_string(got));
}

Index wrap(Index i, Index n) { return ((i % n) + n) % n; }

}  // namespace

Matrix LinearOperator::gram() const {
  const Matrix d = dense();
  return d.transpose() * d;
}

// ---------------------------------------------------------------------------

IdentityOperator::IdentityOperator(Index n) : n_(n) {
  if (n <= 0) throw std::invalid_argument("IdentityOperator: dimension must be positive");
}

Vector IdentityOperator::apply(const Vector& x) const {
  check_size("IdentityOperator", n_, x.size());
  return x;
}

Vector DenseOperator::apply(const Vector& x) const {
  check_size("DenseOperator", cols(), x.size());
  return m_ * x;
}

Vector DenseOperator::apply_adjoint(const Vector& y) const {
  check_size("DenseOperator adjoint", rows(), y.size());
  return m_.transpose() * y;
}

Matrix DenseOperator::gram() const { return m_.transpose() * m_; }

SparseOperator::SparseOperator(SparseMatrix m) : m_(std::move(m)) { m_.makeCompressed(); }

Vector SparseOperator::apply(const Vector& x) const {
  check_size("SparseOperator", cols(), x.size());
  return m_ * x;
}

Vector SparseOperator::apply_adjoint(const Vector& y) const {
  check_size("SparseOperator adjoint", rows(), y.size());
  return m_.transpose() * y;
}

Matrix SparseOperator::gram() const {
  const SparseMatrix g = m_.transpose() * m_;
  return Matrix(g);
}

// ---------------------------------------------------------------------------

BlockDiagonalOperator::BlockDiagonalOperator(std::vector<Matrix> blocks) : blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw std::invalid_argument("BlockDiagonalOperator: no blocks");
  for (const auto& b : blocks_) {
    rows_ += b.rows();
    cols_ += b.cols();
  }
}

Vector BlockDiagonalOperator::apply(const Vector& x) const {
  check_size("BlockDiagonalOperator", cols_, x.size());
  Vector y(rows_);
  Index r = 0, c = 0;
  for (const auto& b : blocks_) {
    y.segment(r, b.rows()) = b * x.segment(c, b.cols());
    r += b.rows();
    c += b.cols();
  }
  return y;
}

Vector BlockDiagonalOperator::apply_adjoint(const Vector& y) const {
  check_size("BlockDiagonalOperator adjoint", rows_, y.size());
  Vector x(cols_);
  Index r = 0, c = 0;
  for (const auto& b : blocks_) {
    x.segment(c, b.cols()) = b.transpose() * y.segment(r, b.rows());
    r += b.rows();
    c += b.cols();
  }
  return x;
}

Matrix BlockDiagonalOperator::dense() const {
  Matrix out = Matrix::Zero(rows_, cols_);
  Index r = 0, c = 0;
  for (const auto& b : blocks_) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

EntryMaskOperator::EntryMaskOperator(Eigen::ArrayXd mask) : mask_(std::move(mask)) {
  if (mask_.size() == 0) throw std::invalid_argument("EntryMaskOperator: empty mask");
  if (((mask_ != 0.0) && (mask_ != 1.0)).any()) throw std::invalid_argument("EntryMaskOperator: mask must be 0/1");
}

Vector EntryMaskOperator::apply(const Vector& x) const {
  check_size("EntryMaskOperator", mask_.size(), x.size());
  return (x.array() * mask_).matrix();
}

Matrix EntryMaskOperator::dense() const { return mask_.matrix().asDiagonal(); }

// ---------------------------------------------------------------------------

CircularConvolution2D::CircularConvolution2D(Matrix kernel)
    : kernel_(std::move(kernel)), shape_{kernel_.rows(), kernel_.cols()} {
  fft_ = std::make_shared<const detail::RealFft2D>(shape_);
  symbol_ = fft_->forward(Eigen::Map<const Vector>(kernel_.data(), kernel_.size()));
}

Vector CircularConvolution2D::apply(const Vector& x) const {
  check_size("CircularConvolution2D", shape_.size(), x.size());
  auto spec = fft_->forward(x);
  for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= symbol_[k];
  return fft_->inverse(std::move(spec)) / static_cast<double>(shape_.size());
}

Vector CircularConvolution2D::apply_adjoint(const Vector& y) const {
  check_size("CircularConvolution2D adjoint", shape_.size(), y.size());
  auto spec = fft_->forward(y);
  for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= std::conj(symbol_[k]);
  return fft_->inverse(std::move(spec)) / static_cast<double>(shape_.size());
}

Matrix CircularConvolution2D::dense() const {
  const Index m = shape_.rows, n = shape_.cols;
  Matrix out = Matrix::Zero(m * n, m * n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i)
      for (Index q = 0; q < n; ++q)
        for (Index p = 0; p < m; ++p)
          out(i + j * m, wrap(i - p, m) + wrap(j - q, n) * m) += kernel_(p, q);
  return out;
}

// ---------------------------------------------------------------------------

Vector PeriodicGradient2D::apply(const Vector& x) const {
  check_size("PeriodicGradient2D", shape_.size(), x.size());
  const Index m = shape_.rows, n = shape_.cols, N = m * n;
  Vector y(2 * N);
  for (Index j = 0; j < n; ++j) {
    const Index jn = (j + 1) % n;
    for (Index i = 0; i < m; ++i) {
      const Index in = (i + 1) % m;
      const double xij = x[i + j * m];
      y[i + j * m] = x[in + j * m] - xij;
      y[N + i + j * m] = x[i + jn * m] - xij;
    }
  }
  return y;
}

Vector PeriodicGradient2D::apply_adjoint(const Vector& y) const {
  check_size("PeriodicGradient2D adjoint", 2 * shape_.size(), y.size());
  const Index m = shape_.rows, n = shape_.cols, N = m * n;
  Vector x(N);
  for (Index j = 0; j < n; ++j) {
    const Index jp = (j + n - 1) % n;
    for (Index i = 0; i < m; ++i) {
      const Index ip = (i + m - 1) % m;
      x[i + j * m] = y[ip + j * m] - y[i + j * m] + y[N + i + jp * m] - y[N + i + j * m];
    }
  }
  return x;
}

Matrix PeriodicGradient2D::dense() const {
  const Index m = shape_.rows, n = shape_.cols, N = m * n;
  Matrix out = Matrix::Zero(2 * N, N);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) {
      const Index row = i + j * m;
      out(row, wrap(i + 1, m) + j * m) += 1.0;
      out(row, row) -= 1.0;
      out(N + row, i + wrap(j + 1, n) * m) += 1.0;
      out(N + row, row) -= 1.0;
    }
  return out;
}

// ---------------------------------------------------------------------------

Matrix gaussian_blur_kernel(ImageShape shape, double sigma, Index halfwidth) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_blur_kernel: sigma must be positive");
  if (halfwidth < 1) throw std::invalid_argument("gaussian_blur_kernel: halfwidth must be at least 1");
  if (shape.rows < 2 * halfwidth + 1 || shape.cols < 2 * halfwidth + 1)
    throw std::invalid_argument("gaussian_blur_kernel: kernel larger than image");
  Matrix k = Matrix::Zero(shape.rows, shape.cols);
  for (Index i = -(halfwidth - 1); i < halfwidth; ++i)
    for (Index j = -(halfwidth - 1); j < halfwidth; ++j)
      k(wrap(i, shape.rows), wrap(j, shape.cols)) =
          std::exp(-static_cast<double>(i * i + j * j) / (2.0 * sigma * sigma));
  return k;
}

SparseMatrix forward_difference_1d(Index d) {
  if (d < 2) throw std::invalid_argument("forward_difference_1d: need at least two samples");
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(2 * (d - 1)));
  for (Index i = 0; i + 1 < d; ++i) {
    t.emplace_back(i, i, -1.0);
    t.emplace_back(i, i + 1, 1.0);
  }
  SparseMatrix out(d - 1, d);
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

SparseMatrix pairwise_difference(Index tasks, Index n) {
  if (tasks < 2 || n < 1) throw std::invalid_argument("pairwise_difference: need two tasks and n >= 1");
  std::vector<Eigen::Triplet<double>> t;
  Index block = 0;
  for (Index i = 0; i < tasks; ++i)
    for (Index j = i + 1; j < tasks; ++j, ++block)
      for (Index r = 0; r < n; ++r) {
        t.emplace_back(block * n + r, i * n + r, 1.0);
        t.emplace_back(block * n + r, j * n + r, -1.0);
      }
  SparseMatrix out(block * n, tasks * n);
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

double estimate_squared_norm(const LinearOperator& A, int iterations, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector v = Vector::NullaryExpr(A.cols(), [&] { return normal(rng); });
  v.normalize();
  double estimate = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Vector u = A.apply_adjoint(A.apply(v));
    const double norm = u.norm();
    if (norm == 0.0) return 0.0;
    estimate = v.dot(u);
    v = u / norm;
  }
  return std::max(estimate, A.apply(v).squaredNorm());
}

}  // namespace sr3
