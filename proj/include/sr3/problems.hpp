#pragma once

// Synthetic problem generators for sparse regression, compressed sensing,
// analysis/synthesis with tight frames, 1-D and 2-D total variation, matrix
// completion and multi-task group sparsity, plus the recovery metrics used
// to score them.
//
// Randomness: every generator draws from std::mt19937_64 streams seeded by
// mix_seed(seed, stream) with a fixed stream per ingredient (matrix, signal,
// noise, ...), so changing the noise level leaves A and x_true untouched.

#include <sr3/operators.hpp>
#include <sr3/prox.hpp>
#include <sr3/relax.hpp>
#include <sr3/types.hpp>

#include <complex>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace sr3::problems {

/// splitmix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);
/// splitmix64(base ^ splitmix64(stream)).
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream);
/// 64-bit FNV-1a, used to turn experiment names into stream ids.
std::uint64_t stream_id(std::string_view name);

class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream) : engine_(mix_seed(seed, stream)) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  Vector normal(Index n);
  Matrix normal(Index rows, Index cols);
  Matrix uniform(Index rows, Index cols);
  /// k distinct indices of {0, ..., n-1} in increasing order.
  std::vector<Index> sample(Index n, Index k);
  /// Haar-distributed orthogonal n x n matrix (QR of a Gaussian with the
  /// sign of diag(R) fixed).
  Matrix orthogonal(Index n);
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
  std::uniform_real_distribution<double> uniform_;
};

struct GroundTruth {
  Vector x;
  /// Indices of the nonzero entries of the sparse object (x itself, its
  /// frame coefficients or its jumps, depending on the problem).
  std::vector<Index> support;
  /// The noise realization added to A x (b = A x + noise).
  Vector noise;
};

struct ProblemSpec {
  std::string kind;
  OperatorPtr A;
  OperatorPtr C;
  Vector b;
  prox::Regularizer reg = prox::Regularizer::l1();
  double lambda = 0.0;
  double kappa = 1.0;
  std::optional<GroundTruth> truth;
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;
  /// Image or matrix shape for tv2d and completion; zero otherwise.
  ImageShape shape;
  /// Group sparsity: task dimension and the true task partition.
  Index task_dim = 0;
  std::vector<std::vector<Index>> task_groups;

  Matrix dense_A() const { return A->dense(); }
};

/// Relaxed system for a dense-A problem (A materialized) with the problem's C
/// and kappa.
RelaxedSystem relaxed_system(const ProblemSpec& spec);
RelaxedSystem relaxed_system(const ProblemSpec& spec, double kappa);

enum class MatrixKind { Gaussian, Uniform, Conditioned };

struct MatrixSpec {
  MatrixKind kind = MatrixKind::Gaussian;
  double cond = 1.0;
  /// Conditioned matrices have singular values geometric from
  /// sigma_min * cond down to sigma_min.
  double sigma_min = 1.0;
};

struct SignalSpec {
  /// Random support positions; otherwise the first k entries.
  bool random_positions = true;
  double magnitude = 1.0;
  /// Independent random signs; otherwise every nonzero equals +magnitude.
  bool random_signs = true;
};

Matrix make_matrix(Index m, Index d, const MatrixSpec& spec, Rng& rng);

ProblemSpec make_lasso(Index m, Index d, Index k_sparse, double noise_sigma, std::uint64_t seed,
                       const MatrixSpec& matrix = {}, const SignalSpec& signal = {});

struct TightFramePair {
  /// A x with C x sparse, C^T C = I; truth support refers to xi.
  ProblemSpec analysis;
  /// (A C^T) xi with xi sparse and C = I.
  ProblemSpec synthesis;
  Vector xi_true;
};

/// C (n x d) is the first d columns of a random orthogonal n x n matrix and
/// x_true = C^T xi_true with k_sparse entries of xi_true in {-1, 1}.
TightFramePair make_tight_frame_problem(Index n, Index d, Index m, Index k_sparse, double noise_sigma,
                                        std::uint64_t seed);

/// Step signal with n_jumps jumps (segment levels in [-2, 2], consecutive
/// levels at least 0.5 apart), Gaussian m x d A and (d-1) x d forward
/// differences for C.  n_jumps = 0 gives a constant signal.
ProblemSpec make_tv1d(Index d, Index m, Index n_jumps, double noise_sigma, std::uint64_t seed);

/// Piecewise-constant test image with intensities in [0, 1]: a background,
/// an ellipse, rectangles and a disk, laid out in relative coordinates.
Matrix make_phantom(Index rows, Index cols);

/// B = K * X + nu G with the Gaussian kernel of `kernel_sigma` and
/// |i|, |j| < halfwidth; C = [D_x; D_y] periodic; isotropic TV as a GroupL2
/// over the per-pixel (w_x, w_y) pairs.
ProblemSpec make_tv2d_deblur(const Matrix& image, double kernel_sigma, Index halfwidth, double noise_nu,
                             std::uint64_t seed);

/// Relaxed model for deconvolution with the periodic gradient: H is diagonal
/// in the 2-D Fourier basis, so x(w) costs two FFT pairs.
class ConvolutionTvSystem final : public RelaxedModel {
 public:
  ConvolutionTvSystem(Matrix kernel, Vector observed, double kappa);
  explicit ConvolutionTvSystem(const ProblemSpec& spec);
  ConvolutionTvSystem(const ProblemSpec& spec, double kappa);
  ~ConvolutionTvSystem() override;

  double kappa() const override { return kappa_; }
  Index x_size() const override { return shape_.size(); }
  Index w_size() const override { return 2 * shape_.size(); }
  Vector solve_x(const Vector& w) const override;
  Vector apply_C(const Vector& x) const override { return grad_.apply(x); }
  double data_misfit(const Vector& x) const override;

  const CircularConvolution2D& convolution() const { return conv_; }
  /// Least-squares deconvolution argmin |K * X - B| computed spectrally
  /// (frequencies where the kernel symbol vanishes are set to zero).
  Vector deconvolve() const;

 private:
  struct Impl;
  ImageShape shape_;
  CircularConvolution2D conv_;
  PeriodicGradient2D grad_;
  Vector observed_;
  double kappa_;
  std::unique_ptr<Impl> impl_;
};

struct TvSpectrum {
  ImageShape shape;
  double kappa = 0.0;
  /// Full 2-D DFT symbols, indexed [col_freq * rows + row_freq].
  std::vector<std::complex<double>> c_hat, dx_hat, dy_hat;
  /// |c|^2 + kappa (|dx|^2 + |dy|^2).
  Vector h_hat;
  /// Per-frequency eigenvalues of the Hermitian 2x2 block of F^T F in the
  /// Fourier basis, from the closed-form 2x2 eigen solution.  In exact
  /// arithmetic eig_max = kappa and eig_min = kappa |c|^2 / h (kappa at the
  /// zero frequency, where dx = dy = 0).
  Vector eig_max, eig_min;
  /// All 2 rows cols singular values of F, descending.
  Vector singular_values;

  /// Number of singular values within tol of sqrt(kappa).
  Index count_at_sqrt_kappa(double tol) const;
};

TvSpectrum tv_spectrum(const ProblemSpec& spec);
TvSpectrum tv_spectrum(const Matrix& kernel, double kappa);

/// X_true = L R^T with Gaussian factors, Bernoulli(observe_frac) mask,
/// b = mask .* (X_true + sigma G); A is the entry mask and C = I.
ProblemSpec make_completion(Index rows, Index cols, Index rank, double observe_frac, double noise_sigma,
                            std::uint64_t seed, prox::SpectralInner inner = prox::SpectralInner::L1);
MaskedCompletionSystem completion_system(const ProblemSpec& spec);
MaskedCompletionSystem completion_system(const ProblemSpec& spec, double kappa);

/// k tasks of dimension n with Gaussian m_i x n blocks; tasks in the same
/// group of `grouping` share one Gaussian generator.  C stacks all
/// k(k-1)/2 pairwise difference blocks; R is the group l2 over them.
ProblemSpec make_group_sparsity(Index n, Index m_i, Index k_tasks, const std::vector<std::vector<Index>>& grouping,
                                double noise_sigma, std::uint64_t seed);

struct Regrouped {
  std::vector<std::vector<Index>> clusters;
  Vector x_refit;
  std::optional<double> rel_error;
};

/// Group sparsity: tasks i, j join when |w_ij| <= eps (default 1e-3 sqrt(n))
/// and each cluster is refit by stacked least squares.  TV-1D: entries with
/// |w_i| <= eps (default 0) tie x_i to x_{i+1}, and each segment is replaced
/// by the mean of x over it.  rel_error is |x_refit - x_true| / |x_true|.
Regrouped regroup_refit(const ProblemSpec& spec, const Vector& w, const Vector& x,
                        std::optional<double> eps = std::nullopt);

struct SupportMetrics {
  double tpp = 0.0;
  double fdp = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  Index true_positives = 0;
  Index false_positives = 0;
  Index estimated = 0;
};

/// Entries with |x_i| > threshold form the estimated support.  FDP is
/// false positives over max(estimated, 1).  Throws on an empty true support.
SupportMetrics support_recovery_metrics(const Vector& x, const std::vector<Index>& true_support,
                                        double threshold = 0.01);

/// 20 log10(|x_true| / |x_hat - x_true|).
double snr_db(const Vector& x_true, const Vector& x_hat);

/// Self-describing JSON container (dims, operator kinds and payloads,
/// regularizer, seed, noise record) for replaying an instance.
std::string serialize(const ProblemSpec& spec);
ProblemSpec deserialize(const std::string& text);
void save_instance(const ProblemSpec& spec, const std::string& path);
ProblemSpec load_instance(const std::string& path);

}  // namespace sr3::problems
