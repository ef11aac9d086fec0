#include <sr3/problems.hpp>

#include "fft.hpp"

#include <Eigen/QR>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace sr3::problems {

using detail::Complex;

namespace {

// Fixed per-ingredient streams.
constexpr std::uint64_t kMatrixStream = 1;
constexpr std::uint64_t kSignalStream = 2;
constexpr std::uint64_t kNoiseStream = 3;
constexpr std::uint64_t kFrameStream = 4;
constexpr std::uint64_t kMaskStream = 5;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

std::vector<Index> nonzero_indices(const Vector& v) {
  std::vector<Index> out;
  for (Index i = 0; i < v.size(); ++i)
    if (v[i] != 0.0) out.push_back(i);
  return out;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) { return splitmix64(base ^ splitmix64(stream)); }

std::uint64_t stream_id(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

Vector Rng::normal(Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal();
  return v;
}

Matrix Rng::normal(Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal();
  return m;
}

Matrix Rng::uniform(Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = uniform();
  return m;
}

std::vector<Index> Rng::sample(Index n, Index k) {
  require(k >= 0 && k <= n, "Rng::sample: need 0 <= k <= n");
  // Partial Fisher-Yates.
  std::vector<Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index i = 0; i < k; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(engine_))]);
  }
  pool.resize(static_cast<std::size_t>(k));
  std::sort(pool.begin(), pool.end());
  return pool;
}

Matrix Rng::orthogonal(Index n) {
  const Eigen::HouseholderQR<Matrix> qr(normal(n, n));
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix& r = qr.matrixQR();
  for (Index j = 0; j < n; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

RelaxedSystem relaxed_system(const ProblemSpec& spec) { return relaxed_system(spec, spec.kappa); }

RelaxedSystem relaxed_system(const ProblemSpec& spec, double kappa) {
  return RelaxedSystem::build(spec.dense_A(), spec.C, spec.b, kappa);
}

// ---------------------------------------------------------------------------
// Sparse regression

Matrix make_matrix(Index m, Index d, const MatrixSpec& spec, Rng& rng) {
  require(m > 0 && d > 0, "make_matrix: empty dimensions");
  switch (spec.kind) {
    case MatrixKind::Gaussian:
      return rng.normal(m, d);
    case MatrixKind::Uniform:
      return rng.uniform(m, d);
    case MatrixKind::Conditioned: {
      require(spec.cond >= 1.0 && std::isfinite(spec.cond), "make_matrix: cond must be >= 1");
      require(spec.sigma_min > 0.0, "make_matrix: sigma_min must be positive");
      const Index r = std::min(m, d);
      const Matrix U = rng.orthogonal(m).leftCols(r);
      const Matrix V = rng.orthogonal(d).leftCols(r);
      Vector s(r);
      for (Index i = 0; i < r; ++i) {
        const double t = r == 1 ? 1.0 : 1.0 - static_cast<double>(i) / static_cast<double>(r - 1);
        s[i] = spec.sigma_min * std::pow(spec.cond, t);
      }
      return U * s.asDiagonal() * V.transpose();
    }
  }
  throw std::invalid_argument("make_matrix: unknown kind");
}

ProblemSpec make_lasso(Index m, Index d, Index k_sparse, double noise_sigma, std::uint64_t seed,
                       const MatrixSpec& matrix, const SignalSpec& signal) {
  require(m > 0 && d > 0, "make_lasso: empty dimensions");
  require(k_sparse >= 0 && k_sparse <= d, "make_lasso: need 0 <= k_sparse <= d");
  require(noise_sigma >= 0.0, "make_lasso: negative noise level");
  Rng matrix_rng(seed, kMatrixStream), signal_rng(seed, kSignalStream), noise_rng(seed, kNoiseStream);

  Matrix A = make_matrix(m, d, matrix, matrix_rng);
  std::vector<Index> support(static_cast<std::size_t>(k_sparse));
  if (signal.random_positions)
    support = signal_rng.sample(d, k_sparse);
  else
    std::iota(support.begin(), support.end(), Index{0});
  Vector x = Vector::Zero(d);
  for (const Index i : support) {
    const double sign = signal.random_signs ? (signal_rng.uniform() < 0.5 ? -1.0 : 1.0) : 1.0;
    x[i] = sign * signal.magnitude;
  }
  const Vector noise = noise_sigma * noise_rng.normal(m);

  ProblemSpec spec;
  spec.kind = "lasso";
  spec.b = A * x + noise;
  spec.A = std::make_shared<DenseOperator>(std::move(A));
  spec.C = std::make_shared<IdentityOperator>(d);
  spec.truth = GroundTruth{x, support, noise};
  spec.seed = seed;
  spec.noise_sigma = noise_sigma;
  return spec;
}

TightFramePair make_tight_frame_problem(Index n, Index d, Index m, Index k_sparse, double noise_sigma,
                                        std::uint64_t seed) {
  require(d > 0 && m > 0, "make_tight_frame_problem: empty dimensions");
  require(n >= d, "make_tight_frame_problem: need n >= d");
  require(k_sparse >= 0 && k_sparse <= n, "make_tight_frame_problem: need 0 <= k_sparse <= n");
  require(noise_sigma >= 0.0, "make_tight_frame_problem: negative noise level");
  Rng frame_rng(seed, kFrameStream), matrix_rng(seed, kMatrixStream), signal_rng(seed, kSignalStream),
      noise_rng(seed, kNoiseStream);

  const Matrix C = frame_rng.orthogonal(n).leftCols(d);
  const std::vector<Index> support = signal_rng.sample(n, k_sparse);
  Vector xi = Vector::Zero(n);
  for (const Index i : support) xi[i] = signal_rng.uniform() < 0.5 ? -1.0 : 1.0;
  const Vector x = C.transpose() * xi;
  const Matrix A = matrix_rng.normal(m, d);
  const Vector noise = noise_sigma * noise_rng.normal(m);
  const Vector b = A * x + noise;

  TightFramePair out;
  out.xi_true = xi;
  auto& an = out.analysis;
  an.kind = "analysis";
  an.A = std::make_shared<DenseOperator>(A);
  an.C = std::make_shared<DenseOperator>(C);
  an.b = b;
  an.kappa = 5.0;
  an.truth = GroundTruth{x, support, noise};
  an.seed = seed;
  an.noise_sigma = noise_sigma;

  auto& syn = out.synthesis;
  syn.kind = "synthesis";
  syn.A = std::make_shared<DenseOperator>(A * C.transpose());
  syn.C = std::make_shared<IdentityOperator>(n);
  syn.b = b;
  syn.kappa = 5.0;
  syn.truth = GroundTruth{xi, support, noise};
  syn.seed = seed;
  syn.noise_sigma = noise_sigma;
  return out;
}

ProblemSpec make_tv1d(Index d, Index m, Index n_jumps, double noise_sigma, std::uint64_t seed) {
  require(d >= 2 && m > 0, "make_tv1d: need d >= 2 and m > 0");
  require(n_jumps >= 0 && n_jumps < d, "make_tv1d: need 0 <= n_jumps < d");
  require(noise_sigma >= 0.0, "make_tv1d: negative noise level");
  Rng matrix_rng(seed, kMatrixStream), signal_rng(seed, kSignalStream), noise_rng(seed, kNoiseStream);

  // Jump p separates x_p and x_{p+1}, i.e. row p of the difference matrix.
  const std::vector<Index> jumps = signal_rng.sample(d - 1, n_jumps);
  Vector x(d);
  double level = 4.0 * signal_rng.uniform() - 2.0;
  std::size_t next = 0;
  for (Index i = 0; i < d; ++i) {
    x[i] = level;
    if (next < jumps.size() && jumps[next] == i) {
      double candidate;
      do candidate = 4.0 * signal_rng.uniform() - 2.0;
      while (std::abs(candidate - level) < 0.5);
      level = candidate;
      ++next;
    }
  }
  Matrix A = matrix_rng.normal(m, d);
  const Vector noise = noise_sigma * noise_rng.normal(m);

  ProblemSpec spec;
  spec.kind = "tv1d";
  spec.b = A * x + noise;
  spec.A = std::make_shared<DenseOperator>(std::move(A));
  spec.C = std::make_shared<SparseOperator>(forward_difference_1d(d));
  spec.lambda = 0.07;
  spec.kappa = 1.0;
  spec.truth = GroundTruth{x, jumps, noise};
  spec.seed = seed;
  spec.noise_sigma = noise_sigma;
  return spec;
}

// ---------------------------------------------------------------------------
// Images

Matrix make_phantom(Index rows, Index cols) {
  require(rows > 0 && cols > 0, "make_phantom: empty shape");
  Matrix X(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(rows);
      const double v = (static_cast<double>(j) + 0.5) / static_cast<double>(cols);
      double value = 0.15;
      const double eu = (u - 0.5) / 0.38, ev = (v - 0.45) / 0.3;
      if (eu * eu + ev * ev <= 1.0) value = 0.5;
      if (u >= 0.2 && u <= 0.45 && v >= 0.25 && v <= 0.4) value = 0.9;
      if (u >= 0.55 && u <= 0.85 && v >= 0.5 && v <= 0.58) value = 1.0;
      const double du = u - 0.65, dv = v - 0.3;
      if (du * du + dv * dv <= 0.08 * 0.08) value = 0.0;
      if (u >= 0.1 && u <= 0.9 && v >= 0.82 && v <= 0.9) value = 0.7;
      X(i, j) = value;
    }
  }
  return X;
}

ProblemSpec make_tv2d_deblur(const Matrix& image, double kernel_sigma, Index halfwidth, double noise_nu,
                             std::uint64_t seed) {
  require(noise_nu >= 0.0, "make_tv2d_deblur: negative noise level");
  const ImageShape shape{image.rows(), image.cols()};
  auto A = std::make_shared<CircularConvolution2D>(gaussian_blur_kernel(shape, kernel_sigma, halfwidth));
  auto C = std::make_shared<PeriodicGradient2D>(shape);
  Rng noise_rng(seed, kNoiseStream);
  const Vector x = Eigen::Map<const Vector>(image.data(), image.size());
  const Vector noise = noise_nu * noise_rng.normal(shape.size());

  ProblemSpec spec;
  spec.kind = "tv2d";
  spec.b = A->apply(x) + noise;
  spec.truth = GroundTruth{x, nonzero_indices(C->apply(x)), noise};
  spec.A = std::move(A);
  spec.C = std::move(C);
  spec.reg = prox::Regularizer::group_l2(prox::GroupPartition::interleaved(shape.size(), 2));
  spec.lambda = 0.075;
  spec.kappa = 0.25;
  spec.seed = seed;
  spec.noise_sigma = noise_nu;
  spec.shape = shape;
  return spec;
}

struct ConvolutionTvSystem::Impl {
  explicit Impl(ImageShape shape) : fft(shape) {}
  detail::RealFft2D fft;
  std::vector<Complex> c, dx, dy;
  std::vector<double> h;
  std::vector<Complex> rhs0;  // conj(c) B
};

namespace {

// Half-spectrum symbols of D_x and D_y: shifting by +1 along a dimension
// multiplies frequency f of N by exp(2 pi i f / N).
Complex shift_symbol(Index f, Index n) {
  const double theta = 2.0 * std::numbers::pi * static_cast<double>(f) / static_cast<double>(n);
  return Complex(std::cos(theta) - 1.0, std::sin(theta));
}

}  // namespace

ConvolutionTvSystem::ConvolutionTvSystem(Matrix kernel, Vector observed, double kappa)
    : shape_{kernel.rows(), kernel.cols()},
      conv_(kernel),
      grad_(shape_),
      observed_(std::move(observed)),
      kappa_(kappa),
      impl_(std::make_unique<Impl>(shape_)) {
  require(kappa_ > 0.0, "ConvolutionTvSystem: kappa must be positive");
  require(observed_.size() == shape_.size(), "ConvolutionTvSystem: observation size mismatch");
  const Index half = shape_.rows / 2 + 1;
  impl_->c = impl_->fft.forward(Eigen::Map<const Vector>(kernel.data(), kernel.size()));
  const std::vector<Complex> b_hat = impl_->fft.forward(observed_);
  const std::size_t n = impl_->c.size();
  impl_->dx.resize(n);
  impl_->dy.resize(n);
  impl_->h.resize(n);
  impl_->rhs0.resize(n);
  for (Index v = 0; v < shape_.cols; ++v) {
    for (Index u = 0; u < half; ++u) {
      const auto k = static_cast<std::size_t>(v * half + u);
      impl_->dx[k] = shift_symbol(u, shape_.rows);
      impl_->dy[k] = shift_symbol(v, shape_.cols);
      impl_->h[k] = std::norm(impl_->c[k]) + kappa_ * (std::norm(impl_->dx[k]) + std::norm(impl_->dy[k]));
      impl_->rhs0[k] = std::conj(impl_->c[k]) * b_hat[k];
    }
  }
  const double h_max = *std::max_element(impl_->h.begin(), impl_->h.end());
  const double h_min = *std::min_element(impl_->h.begin(), impl_->h.end());
  if (!(h_min > 1e-12 * h_max))
    throw NumericalError("ConvolutionTvSystem: H is singular (kernel symbol vanishes at the zero frequency)");
}

ConvolutionTvSystem::ConvolutionTvSystem(const ProblemSpec& spec) : ConvolutionTvSystem(spec, spec.kappa) {}

namespace {

Matrix kernel_of(const ProblemSpec& spec) {
  const auto* conv = dynamic_cast<const CircularConvolution2D*>(spec.A.get());
  if (!conv) throw std::invalid_argument("expected a circular-convolution data operator");
  return conv->kernel();
}

}  // namespace

ConvolutionTvSystem::ConvolutionTvSystem(const ProblemSpec& spec, double kappa)
    : ConvolutionTvSystem(kernel_of(spec), spec.b, kappa) {}

ConvolutionTvSystem::~ConvolutionTvSystem() = default;

Vector ConvolutionTvSystem::solve_x(const Vector& w) const {
  require(w.size() == w_size(), "ConvolutionTvSystem::solve_x: size mismatch");
  const Index n = shape_.size();
  const std::vector<Complex> wx = impl_->fft.forward(w.head(n));
  const std::vector<Complex> wy = impl_->fft.forward(w.tail(n));
  std::vector<Complex> x_hat(wx.size());
  for (std::size_t k = 0; k < x_hat.size(); ++k)
    x_hat[k] = (impl_->rhs0[k] + kappa_ * (std::conj(impl_->dx[k]) * wx[k] + std::conj(impl_->dy[k]) * wy[k])) /
               impl_->h[k];
  return impl_->fft.inverse(std::move(x_hat)) / static_cast<double>(n);
}

double ConvolutionTvSystem::data_misfit(const Vector& x) const {
  return 0.5 * (conv_.apply(x) - observed_).squaredNorm();
}

Vector ConvolutionTvSystem::deconvolve() const {
  const std::vector<Complex> b_hat = impl_->fft.forward(observed_);
  double c_max = 0.0;
  for (const auto& c : impl_->c) c_max = std::max(c_max, std::abs(c));
  std::vector<Complex> x_hat(b_hat.size());
  for (std::size_t k = 0; k < x_hat.size(); ++k) {
    const double c2 = std::norm(impl_->c[k]);
    x_hat[k] = c2 > 1e-24 * c_max * c_max ? std::conj(impl_->c[k]) * b_hat[k] / c2 : Complex(0.0);
  }
  return impl_->fft.inverse(std::move(x_hat)) / static_cast<double>(shape_.size());
}

Index TvSpectrum::count_at_sqrt_kappa(double tol) const {
  const double target = std::sqrt(kappa);
  return ((singular_values.array() - target).abs() <= tol).count();
}

TvSpectrum tv_spectrum(const ProblemSpec& spec) { return tv_spectrum(kernel_of(spec), spec.kappa); }

TvSpectrum tv_spectrum(const Matrix& kernel, double kappa) {
  require(kappa > 0.0, "tv_spectrum: kappa must be positive");
  TvSpectrum out;
  out.shape = {kernel.rows(), kernel.cols()};
  out.kappa = kappa;
  const Index rows = kernel.rows(), cols = kernel.cols(), n = rows * cols;
  out.c_hat = detail::full_spectrum(kernel);
  out.dx_hat.resize(static_cast<std::size_t>(n));
  out.dy_hat.resize(static_cast<std::size_t>(n));
  out.h_hat.resize(n);
  out.eig_max.resize(n);
  out.eig_min.resize(n);
  out.singular_values.resize(2 * n);
  for (Index v = 0; v < cols; ++v) {
    for (Index u = 0; u < rows; ++u) {
      const Index k = v * rows + u;
      const auto sk = static_cast<std::size_t>(k);
      const Complex dx = shift_symbol(u, rows), dy = shift_symbol(v, cols);
      out.dx_hat[sk] = dx;
      out.dy_hat[sk] = dy;
      const double h = std::norm(out.c_hat[sk]) + kappa * (std::norm(dx) + std::norm(dy));
      out.h_hat[k] = h;
      // kappa I - kappa^2 d d^H / h with d = (conj dx, conj dy): the
      // frequency-domain block of kappa I - kappa^2 C H^{-1} C^T.
      const double a = kappa - kappa * kappa * std::norm(dx) / h;
      const double c = kappa - kappa * kappa * std::norm(dy) / h;
      const double b = kappa * kappa * std::abs(dx * std::conj(dy)) / h;
      const double mid = 0.5 * (a + c);
      const double rad = std::hypot(0.5 * (a - c), b);
      out.eig_max[k] = mid + rad;
      out.eig_min[k] = mid - rad;
      out.singular_values[2 * k] = std::sqrt(std::max(out.eig_max[k], 0.0));
      out.singular_values[2 * k + 1] = std::sqrt(std::max(out.eig_min[k], 0.0));
    }
  }
  std::sort(out.singular_values.begin(), out.singular_values.end(), std::greater<>());
  return out;
}

// ---------------------------------------------------------------------------
// Matrix completion

ProblemSpec make_completion(Index rows, Index cols, Index rank, double observe_frac, double noise_sigma,
                            std::uint64_t seed, prox::SpectralInner inner) {
  require(rows > 0 && cols > 0, "make_completion: empty shape");
  require(rank >= 1 && rank <= std::min(rows, cols), "make_completion: need 1 <= rank <= min(rows, cols)");
  require(observe_frac > 0.0 && observe_frac <= 1.0, "make_completion: observe_frac must lie in (0, 1]");
  require(noise_sigma >= 0.0, "make_completion: negative noise level");
  Rng matrix_rng(seed, kSignalStream), mask_rng(seed, kMaskStream), noise_rng(seed, kNoiseStream);

  const Matrix L = matrix_rng.normal(rows, rank);
  const Matrix R = matrix_rng.normal(cols, rank);
  const Matrix X = L * R.transpose();
  Eigen::ArrayXd mask(rows * cols);
  for (Index k = 0; k < mask.size(); ++k) mask[k] = observe_frac == 1.0 || mask_rng.uniform() < observe_frac ? 1.0 : 0.0;
  if (mask.sum() == 0.0) throw std::invalid_argument("make_completion: empty mask");
  const Vector x = Eigen::Map<const Vector>(X.data(), X.size());
  const Vector noise = (mask * (noise_sigma * noise_rng.normal(x.size())).array()).matrix();

  ProblemSpec spec;
  spec.kind = "completion";
  spec.b = (mask * x.array()).matrix() + noise;
  spec.A = std::make_shared<EntryMaskOperator>(mask);
  spec.C = std::make_shared<IdentityOperator>(x.size());
  spec.reg = prox::Regularizer::singular_values(inner, rows, cols);
  spec.kappa = 0.5;
  spec.truth = GroundTruth{x, {}, noise};
  spec.seed = seed;
  spec.noise_sigma = noise_sigma;
  spec.shape = {rows, cols};
  return spec;
}

MaskedCompletionSystem completion_system(const ProblemSpec& spec) { return completion_system(spec, spec.kappa); }

MaskedCompletionSystem completion_system(const ProblemSpec& spec, double kappa) {
  const auto* mask = dynamic_cast<const EntryMaskOperator*>(spec.A.get());
  if (!mask) throw std::invalid_argument("completion_system: expected an entry-mask data operator");
  return MaskedCompletionSystem(mask->mask(), spec.b, kappa);
}

// ---------------------------------------------------------------------------
// Group sparsity

namespace {

void check_partition(const std::vector<std::vector<Index>>& grouping, Index k) {
  std::vector<int> seen(static_cast<std::size_t>(k), 0);
  for (const auto& g : grouping) {
    require(!g.empty(), "grouping: empty group");
    for (const Index t : g) {
      require(t >= 0 && t < k, "grouping: task index out of range");
      require(seen[static_cast<std::size_t>(t)]++ == 0, "grouping: task listed twice");
    }
  }
  for (const int s : seen) require(s == 1, "grouping: some task is not assigned");
}

std::vector<std::vector<Index>> canonical(std::vector<std::vector<Index>> groups) {
  for (auto& g : groups) std::sort(g.begin(), g.end());
  std::sort(groups.begin(), groups.end());
  return groups;
}

}  // namespace

ProblemSpec make_group_sparsity(Index n, Index m_i, Index k_tasks, const std::vector<std::vector<Index>>& grouping,
                                double noise_sigma, std::uint64_t seed) {
  require(n > 0 && m_i > 0 && k_tasks >= 2, "make_group_sparsity: need n, m_i > 0 and at least two tasks");
  require(noise_sigma >= 0.0, "make_group_sparsity: negative noise level");
  check_partition(grouping, k_tasks);
  Rng matrix_rng(seed, kMatrixStream), signal_rng(seed, kSignalStream), noise_rng(seed, kNoiseStream);

  std::vector<Matrix> blocks;
  for (Index t = 0; t < k_tasks; ++t) blocks.push_back(matrix_rng.normal(m_i, n));
  const auto groups = canonical(grouping);
  Vector x(n * k_tasks);
  for (const auto& g : groups) {
    const Vector generator = signal_rng.normal(n);
    for (const Index t : g) x.segment(t * n, n) = generator;
  }
  auto A = std::make_shared<BlockDiagonalOperator>(std::move(blocks));
  const Vector noise = noise_sigma * noise_rng.normal(A->rows());

  std::vector<Index> group_of(static_cast<std::size_t>(k_tasks));
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (const Index t : groups[g]) group_of[static_cast<std::size_t>(t)] = static_cast<Index>(g);
  std::vector<Index> support;
  Index pair = 0;
  for (Index i = 0; i < k_tasks; ++i)
    for (Index j = i + 1; j < k_tasks; ++j, ++pair)
      if (group_of[static_cast<std::size_t>(i)] != group_of[static_cast<std::size_t>(j)]) support.push_back(pair);

  ProblemSpec spec;
  spec.kind = "group_sparsity";
  spec.b = A->apply(x) + noise;
  spec.A = std::move(A);
  spec.C = std::make_shared<SparseOperator>(pairwise_difference(k_tasks, n));
  spec.reg = prox::Regularizer::group_l2(prox::GroupPartition::contiguous(k_tasks * (k_tasks - 1) / 2, n));
  spec.lambda = 10.0;
  spec.kappa = 1.0;
  spec.truth = GroundTruth{x, support, noise};
  spec.seed = seed;
  spec.noise_sigma = noise_sigma;
  spec.task_dim = n;
  spec.task_groups = groups;
  return spec;
}

namespace {

struct UnionFind {
  explicit UnionFind(Index n) : parent(static_cast<std::size_t>(n)) { std::iota(parent.begin(), parent.end(), 0); }
  Index find(Index i) {
    while (parent[static_cast<std::size_t>(i)] != i) i = parent[static_cast<std::size_t>(i)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(i)])];
    return i;
  }
  void join(Index a, Index b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }
  std::vector<Index> parent;
};

std::optional<double> relative_error(const ProblemSpec& spec, const Vector& x) {
  if (!spec.truth || spec.truth->x.size() != x.size()) return std::nullopt;
  const double ref = spec.truth->x.norm();
  if (ref == 0.0) return std::nullopt;
  return (x - spec.truth->x).norm() / ref;
}

Regrouped regroup_tasks(const ProblemSpec& spec, const Vector& w, double eps) {
  const auto* A = dynamic_cast<const BlockDiagonalOperator*>(spec.A.get());
  if (!A) throw std::invalid_argument("regroup_refit: expected a block-diagonal data operator");
  const Index k = static_cast<Index>(A->blocks().size());
  const Index n = spec.task_dim;
  require(w.size() == n * k * (k - 1) / 2, "regroup_refit: w has the wrong size");

  UnionFind uf(k);
  Index pair = 0;
  for (Index i = 0; i < k; ++i)
    for (Index j = i + 1; j < k; ++j, ++pair)
      if (w.segment(pair * n, n).norm() <= eps) uf.join(i, j);

  Regrouped out;
  std::vector<Index> row_offset(static_cast<std::size_t>(k) + 1, 0);
  for (Index t = 0; t < k; ++t)
    row_offset[static_cast<std::size_t>(t) + 1] = row_offset[static_cast<std::size_t>(t)] + A->blocks()[static_cast<std::size_t>(t)].rows();
  for (Index t = 0; t < k; ++t) {
    if (uf.find(t) != t) continue;
    std::vector<Index> cluster;
    for (Index s = t; s < k; ++s)
      if (uf.find(s) == t) cluster.push_back(s);
    out.clusters.push_back(cluster);
  }
  out.x_refit.resize(n * k);
  for (const auto& cluster : out.clusters) {
    Index rows = 0;
    for (const Index t : cluster) rows += A->blocks()[static_cast<std::size_t>(t)].rows();
    Matrix stacked(rows, n);
    Vector rhs(rows);
    Index r = 0;
    for (const Index t : cluster) {
      const Matrix& block = A->blocks()[static_cast<std::size_t>(t)];
      stacked.middleRows(r, block.rows()) = block;
      rhs.segment(r, block.rows()) = spec.b.segment(row_offset[static_cast<std::size_t>(t)], block.rows());
      r += block.rows();
    }
    const Vector xc = stacked.completeOrthogonalDecomposition().solve(rhs);
    for (const Index t : cluster) out.x_refit.segment(t * n, n) = xc;
  }
  out.rel_error = relative_error(spec, out.x_refit);
  return out;
}

Regrouped regroup_segments(const ProblemSpec& spec, const Vector& w, const Vector& x, double eps) {
  require(w.size() + 1 == x.size(), "regroup_refit: TV-1D needs w of size d - 1");
  Regrouped out;
  out.x_refit.resize(x.size());
  Index start = 0;
  for (Index i = 0; i < x.size(); ++i) {
    const bool last = i + 1 == x.size() || std::abs(w[i]) > eps;
    if (!last) continue;
    std::vector<Index> segment(static_cast<std::size_t>(i - start + 1));
    std::iota(segment.begin(), segment.end(), start);
    out.x_refit.segment(start, i - start + 1).setConstant(x.segment(start, i - start + 1).mean());
    out.clusters.push_back(std::move(segment));
    start = i + 1;
  }
  out.rel_error = relative_error(spec, out.x_refit);
  return out;
}

}  // namespace

Regrouped regroup_refit(const ProblemSpec& spec, const Vector& w, const Vector& x, std::optional<double> eps) {
  if (spec.kind == "group_sparsity")
    return regroup_tasks(spec, w, eps.value_or(1e-3 * std::sqrt(static_cast<double>(spec.task_dim))));
  if (spec.kind == "tv1d") return regroup_segments(spec, w, x, eps.value_or(0.0));
  throw std::invalid_argument("regroup_refit: only group_sparsity and tv1d problems can be regrouped");
}

// ---------------------------------------------------------------------------
// Metrics

SupportMetrics support_recovery_metrics(const Vector& x, const std::vector<Index>& true_support, double threshold) {
  if (true_support.empty()) throw std::invalid_argument("support_recovery_metrics: empty true support");
  std::vector<char> truth(static_cast<std::size_t>(x.size()), 0);
  for (const Index i : true_support) {
    require(i >= 0 && i < x.size(), "support_recovery_metrics: support index out of range");
    truth[static_cast<std::size_t>(i)] = 1;
  }
  SupportMetrics m;
  for (Index i = 0; i < x.size(); ++i) {
    if (!(std::abs(x[i]) > threshold)) continue;
    ++m.estimated;
    if (truth[static_cast<std::size_t>(i)])
      ++m.true_positives;
    else
      ++m.false_positives;
  }
  const double k = static_cast<double>(true_support.size());
  m.tpp = static_cast<double>(m.true_positives) / k;
  m.fdp = static_cast<double>(m.false_positives) / static_cast<double>(std::max<Index>(m.estimated, 1));
  m.precision = m.estimated > 0 ? static_cast<double>(m.true_positives) / static_cast<double>(m.estimated) : 0.0;
  m.f1 = m.true_positives > 0 ? 2.0 * static_cast<double>(m.true_positives) / (static_cast<double>(m.estimated) + k)
                              : 0.0;
  return m;
}

double snr_db(const Vector& x_true, const Vector& x_hat) {
  require(x_true.size() == x_hat.size(), "snr_db: size mismatch");
  return 20.0 * std::log10(x_true.norm() / (x_hat - x_true).norm());
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

using nlohmann::json;

json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

json to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from(const json& j) {
  const auto values = j.at("data").get<std::vector<double>>();
  return Eigen::Map<const Matrix>(values.data(), j.at("rows").get<Index>(), j.at("cols").get<Index>());
}

json operator_to_json(const LinearOperator& op) {
  if (const auto* p = dynamic_cast<const IdentityOperator*>(&op)) return {{"type", "identity"}, {"n", p->rows()}};
  if (const auto* p = dynamic_cast<const DenseOperator*>(&op)) return {{"type", "dense"}, {"matrix", to_json(p->matrix())}};
  if (const auto* p = dynamic_cast<const SparseOperator*>(&op)) {
    json triplets = json::array();
    for (Index k = 0; k < p->matrix().outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(p->matrix(), k); it; ++it)
        triplets.push_back({it.row(), it.col(), it.value()});
    return {{"type", "sparse"}, {"rows", p->rows()}, {"cols", p->cols()}, {"triplets", triplets}};
  }
  if (const auto* p = dynamic_cast<const BlockDiagonalOperator*>(&op)) {
    json blocks = json::array();
    for (const auto& b : p->blocks()) blocks.push_back(to_json(b));
    return {{"type", "block_diagonal"}, {"blocks", blocks}};
  }
  if (const auto* p = dynamic_cast<const EntryMaskOperator*>(&op))
    return {{"type", "mask"}, {"mask", to_json(Vector(p->mask().matrix()))}};
  if (const auto* p = dynamic_cast<const CircularConvolution2D*>(&op))
    return {{"type", "convolution"}, {"kernel", to_json(p->kernel())}};
  if (const auto* p = dynamic_cast<const PeriodicGradient2D*>(&op))
    return {{"type", "periodic_gradient"}, {"rows", p->shape().rows}, {"cols", p->shape().cols}};
  throw std::invalid_argument("serialize: unsupported operator type");
}

OperatorPtr operator_from(const json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "identity") return std::make_shared<IdentityOperator>(j.at("n").get<Index>());
  if (type == "dense") return std::make_shared<DenseOperator>(matrix_from(j.at("matrix")));
  if (type == "sparse") {
    std::vector<Eigen::Triplet<double>> t;
    for (const auto& e : j.at("triplets")) t.emplace_back(e[0].get<Index>(), e[1].get<Index>(), e[2].get<double>());
    SparseMatrix m(j.at("rows").get<Index>(), j.at("cols").get<Index>());
    m.setFromTriplets(t.begin(), t.end());
    return std::make_shared<SparseOperator>(std::move(m));
  }
  if (type == "block_diagonal") {
    std::vector<Matrix> blocks;
    for (const auto& b : j.at("blocks")) blocks.push_back(matrix_from(b));
    return std::make_shared<BlockDiagonalOperator>(std::move(blocks));
  }
  if (type == "mask") return std::make_shared<EntryMaskOperator>(vector_from(j.at("mask")).array());
  if (type == "convolution") return std::make_shared<CircularConvolution2D>(matrix_from(j.at("kernel")));
  if (type == "periodic_gradient")
    return std::make_shared<PeriodicGradient2D>(ImageShape{j.at("rows").get<Index>(), j.at("cols").get<Index>()});
  throw std::invalid_argument("deserialize: unknown operator type '" + type + "'");
}

json regularizer_to_json(const prox::Regularizer& reg) {
  return std::visit(
      [](const auto& k) -> json {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, prox::L1>) return {{"type", "l1"}};
        else if constexpr (std::is_same_v<K, prox::L0>) return {{"type", "l0"}};
        else if constexpr (std::is_same_v<K, prox::Lp>) return {{"type", "lp"}, {"p", k.p}};
        else if constexpr (std::is_same_v<K, prox::Cad>) return {{"type", "cad"}, {"rho", k.rho}};
        else if constexpr (std::is_same_v<K, prox::GroupL2>) {
          std::vector<std::vector<Index>> groups;
          for (Index g = 0; g < k.groups.count(); ++g) groups.emplace_back(k.groups.group_begin(g), k.groups.group_end(g));
          return {{"type", "group_l2"}, {"dim", k.groups.dim()}, {"groups", groups}};
        } else if constexpr (std::is_same_v<K, prox::SqL2>) return {{"type", "sq_l2"}};
        else if constexpr (std::is_same_v<K, prox::IndicatorSet>) {
          if (const auto* s = std::get_if<prox::Sphere>(&k.set)) return {{"type", "sphere"}, {"radius", s->radius}};
          return {{"type", "nonnegative"}};
        } else {
          return {{"type", "singular_values"},
                  {"inner", k.inner == prox::SpectralInner::L1 ? "l1" : "l0"},
                  {"rows", k.rows},
                  {"cols", k.cols}};
        }
      },
      reg.kind());
}

prox::Regularizer regularizer_from(const json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "l1") return prox::Regularizer::l1();
  if (type == "l0") return prox::Regularizer::l0();
  if (type == "lp") return prox::Regularizer::lp(j.at("p").get<double>());
  if (type == "cad") return prox::Regularizer::cad(j.at("rho").get<double>());
  if (type == "group_l2")
    return prox::Regularizer::group_l2(
        prox::GroupPartition(j.at("groups").get<std::vector<std::vector<Index>>>(), j.at("dim").get<Index>()));
  if (type == "sq_l2") return prox::Regularizer::sq_l2();
  if (type == "nonnegative") return prox::Regularizer::nonnegative();
  if (type == "sphere") return prox::Regularizer::sphere(j.at("radius").get<double>());
  if (type == "singular_values")
    return prox::Regularizer::singular_values(
        j.at("inner").get<std::string>() == "l1" ? prox::SpectralInner::L1 : prox::SpectralInner::L0,
        j.at("rows").get<Index>(), j.at("cols").get<Index>());
  throw std::invalid_argument("deserialize: unknown regularizer '" + type + "'");
}

constexpr const char* kFormat = "sr3-instance";
constexpr int kVersion = 1;

}  // namespace

std::string serialize(const ProblemSpec& spec) {
  require(spec.A && spec.C, "serialize: operators missing");
  json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["kind"] = spec.kind;
  j["seed"] = spec.seed;
  j["noise_sigma"] = spec.noise_sigma;
  j["lambda"] = spec.lambda;
  j["kappa"] = spec.kappa;
  j["shape"] = {spec.shape.rows, spec.shape.cols};
  j["task_dim"] = spec.task_dim;
  j["task_groups"] = spec.task_groups;
  j["A"] = operator_to_json(*spec.A);
  j["C"] = operator_to_json(*spec.C);
  j["b"] = to_json(spec.b);
  j["regularizer"] = regularizer_to_json(spec.reg);
  if (spec.truth)
    j["truth"] = {{"x", to_json(spec.truth->x)}, {"support", spec.truth->support}, {"noise", to_json(spec.truth->noise)}};
  return j.dump();
}

ProblemSpec deserialize(const std::string& text) {
  const json j = json::parse(text);
  if (j.value("format", "") != kFormat) throw std::invalid_argument("deserialize: not an sr3 instance");
  if (j.at("version").get<int>() != kVersion) throw std::invalid_argument("deserialize: unsupported version");
  ProblemSpec spec;
  spec.kind = j.at("kind").get<std::string>();
  spec.seed = j.at("seed").get<std::uint64_t>();
  spec.noise_sigma = j.at("noise_sigma").get<double>();
  spec.lambda = j.at("lambda").get<double>();
  spec.kappa = j.at("kappa").get<double>();
  spec.shape = {j.at("shape")[0].get<Index>(), j.at("shape")[1].get<Index>()};
  spec.task_dim = j.at("task_dim").get<Index>();
  spec.task_groups = j.at("task_groups").get<std::vector<std::vector<Index>>>();
  spec.A = operator_from(j.at("A"));
  spec.C = operator_from(j.at("C"));
  spec.b = vector_from(j.at("b"));
  spec.reg = regularizer_from(j.at("regularizer"));
  if (j.contains("truth")) {
    const auto& t = j.at("truth");
    spec.truth = GroundTruth{vector_from(t.at("x")), t.at("support").get<std::vector<Index>>(),
                             vector_from(t.at("noise"))};
  }
  return spec;
}

void save_instance(const ProblemSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_instance: cannot open " + path);
  out << serialize(spec) << '\n';
  if (!out) throw std::runtime_error("save_instance: write failed for " + path);
}

ProblemSpec load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_instance: cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return deserialize(buffer.str());
}

}  // namespace sr3::problems
