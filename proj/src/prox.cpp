#include <sr3/prox.hpp>

#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <sstream>

namespace sr3::prox {

namespace {

void check_alpha(double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw std::invalid_argument("prox: alpha must be finite and nonnegative");
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr int kNewtonMaxIters = 100;

}  // namespace

// ---------------------------------------------------------------------------
// GroupPartition

GroupPartition::GroupPartition(const std::vector<std::vector<Index>>& groups, Index dim)
    : dim_(dim) {
  if (dim < 0) throw std::invalid_argument("GroupPartition: negative dimension");
  std::vector<char> seen(static_cast<std::size_t>(dim), 0);
  offsets_.reserve(groups.size() + 1);
  indices_.reserve(static_cast<std::size_t>(dim));
  for (const auto& g : groups) {
    if (g.empty()) throw std::invalid_argument("GroupPartition: empty group");
    for (Index i : g) {
      if (i < 0 || i >= dim) throw std::invalid_argument("GroupPartition: index out of range");
      if (seen[static_cast<std::size_t>(i)])
        throw std::invalid_argument("GroupPartition: groups overlap at index " + std::to_string(i));
      seen[static_cast<std::size_t>(i)] = 1;
      indices_.push_back(i);
    }
    offsets_.push_back(static_cast<Index>(indices_.size()));
  }
  if (static_cast<Index>(indices_.size()) != dim)
    throw std::invalid_argument("GroupPartition: groups leave indices uncovered");
}

GroupPartition GroupPartition::contiguous(Index count, Index size) {
  if (count < 0 || size <= 0) throw std::invalid_argument("GroupPartition: bad contiguous layout");
  GroupPartition out;
  out.dim_ = count * size;
  out.indices_.resize(static_cast<std::size_t>(out.dim_));
  out.offsets_.resize(static_cast<std::size_t>(count) + 1);
  for (Index i = 0; i < out.dim_; ++i) out.indices_[static_cast<std::size_t>(i)] = i;
  for (Index g = 0; g <= count; ++g) out.offsets_[static_cast<std::size_t>(g)] = g * size;
  return out;
}

GroupPartition GroupPartition::interleaved(Index stride, Index arity) {
  if (stride <= 0 || arity <= 0) throw std::invalid_argument("GroupPartition: bad interleaved layout");
  GroupPartition out;
  out.dim_ = stride * arity;
  out.indices_.reserve(static_cast<std::size_t>(out.dim_));
  out.offsets_.reserve(static_cast<std::size_t>(stride) + 1);
  for (Index p = 0; p < stride; ++p) {
    for (Index a = 0; a < arity; ++a) out.indices_.push_back(p + a * stride);
    out.offsets_.push_back(static_cast<Index>(out.indices_.size()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scalar kernels

double prox_lp_scalar(double z, double alpha, double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("prox_lp: p must lie in (0, 1)");
  check_alpha(alpha);
  if (alpha == 0.0 || z == 0.0) return z;

  const double a = std::abs(z);
  // f(x) = (x - a)^2 / (2 alpha) + x^p on x >= 0; f'' changes sign once.
  const auto df = [&](double x) { return (x - a) / alpha + p * std::pow(x, p - 1.0); };
  const auto d2f = [&](double x) { return 1.0 / alpha + p * (p - 1.0) * std::pow(x, p - 2.0); };
  const auto f = [&](double x) { return (x - a) * (x - a) / (2.0 * alpha) + std::pow(x, p); };

  const double inflection = std::pow(alpha * p * (1.0 - p), 1.0 / (2.0 - p));
  if (inflection >= a || df(inflection) >= 0.0) return 0.0;

  // f' is convex and increasing on (inflection, inf) with f'(a) > 0, so
  // Newton started at a decreases monotonically onto the local minimizer.
  const double tol = 1e-12 * (1.0 + a);
  double x = a;
  bool converged = false;
  for (int it = 0; it < kNewtonMaxIters; ++it) {
    const double g = df(x);
    if (std::abs(g) <= tol) {
      converged = true;
      break;
    }
    const double step = g / d2f(x);
    double next = x - step;
    if (next <= inflection) next = 0.5 * (x + inflection);
    // Stagnation at machine precision counts as convergence: when alpha is
    // tiny, f' is dominated by rounding in (x - a) / alpha.
    if (std::abs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * x) {
      x = next;
      converged = true;
      break;
    }
    x = next;
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "prox_lp: Newton iteration did not converge (z=" << z << ", alpha=" << alpha
        << ", p=" << p << ")";
    throw NumericalError(msg.str());
  }
  const double root = x;
  const double zero_value = a * a / (2.0 * alpha);
  if (zero_value <= f(root)) return 0.0;
  return std::copysign(root, z);
}

double prox_cad_scalar(double z, double alpha, double rho) {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw std::invalid_argument("prox_cad: rho must be positive");
  check_alpha(alpha);
  if (alpha == 0.0) return z;
  const double a = std::abs(z);
  // Best point inside |x| <= rho (soft threshold clipped to rho) against the
  // unpenalized-beyond-rho candidate x = z.
  const double inner = std::min(std::max(a - alpha, 0.0), rho);
  const double inner_cost = 0.5 * (inner - a) * (inner - a) + alpha * inner;
  if (a > rho && alpha * rho < inner_cost) return z;
  return std::copysign(inner, z);
}

// ---------------------------------------------------------------------------
// Vector operators

Vector prox_l1(const Vector& z, double alpha) {
  check_alpha(alpha);
  return z.array().sign() * (z.array().abs() - alpha).max(0.0);
}

Vector prox_l0(const Vector& z, double alpha) {
  check_alpha(alpha);
  const double threshold = std::sqrt(2.0 * alpha);
  return (z.array().abs() > threshold).select(z, 0.0);
}

Vector prox_lp(const Vector& z, double alpha, double p) {
  check_alpha(alpha);
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("prox_lp: p must lie in (0, 1)");
  Vector out(z.size());
  for (Index i = 0; i < z.size(); ++i) out[i] = prox_lp_scalar(z[i], alpha, p);
  return out;
}

Vector prox_cad(const Vector& z, double alpha, double rho) {
  check_alpha(alpha);
  if (!(rho > 0.0)) throw std::invalid_argument("prox_cad: rho must be positive");
  Vector out(z.size());
  for (Index i = 0; i < z.size(); ++i) out[i] = prox_cad_scalar(z[i], alpha, rho);
  return out;
}

Vector prox_group_l2(const Vector& z, double alpha, const GroupPartition& groups) {
  check_alpha(alpha);
  if (groups.dim() != z.size()) throw std::invalid_argument("prox_group_l2: partition/vector size mismatch");
  Vector out = Vector::Zero(z.size());
  for (Index g = 0; g < groups.count(); ++g) {
    double sq = 0.0;
    for (const Index* i = groups.group_begin(g); i != groups.group_end(g); ++i) sq += z[*i] * z[*i];
    const double norm = std::sqrt(sq);
    if (norm <= alpha) continue;
    const double scale = (norm - alpha) / norm;
    for (const Index* i = groups.group_begin(g); i != groups.group_end(g); ++i) out[*i] = scale * z[*i];
  }
  return out;
}

Vector prox_sq_l2(const Vector& z, double alpha) {
  check_alpha(alpha);
  return z / (1.0 + alpha);
}

Vector project_set(const Vector& z, const ConstraintSet& set) {
  return std::visit(
      overloaded{
          [&](const Nonnegative&) -> Vector { return z.cwiseMax(0.0); },
          [&](const Sphere& s) -> Vector {
            if (!(s.radius > 0.0)) throw std::invalid_argument("project_set: sphere radius must be positive");
            if (z.size() == 0) throw std::invalid_argument("project_set: empty vector");
            const double norm = z.norm();
            if (norm == 0.0) {
              Vector out = Vector::Zero(z.size());
              out[0] = s.radius;
              return out;
            }
            return z * (s.radius / norm);
          },
      },
      set);
}

namespace {

// Spectral prox returning the thresholded singular values alongside.
std::pair<Matrix, Vector> spectral_prox(const Matrix& z, double alpha, SpectralInner inner) {
  Eigen::BDCSVD<Matrix> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("prox_singular_values: SVD failed");
  const Vector sigma = svd.singularValues();
  if (alpha == 0.0) return {z, sigma};
  const Vector shrunk = inner == SpectralInner::L1 ? prox_l1(sigma, alpha) : prox_l0(sigma, alpha);
  Index rank = 0;
  while (rank < shrunk.size() && shrunk[rank] > 0.0) ++rank;
  if (rank == 0) return {Matrix::Zero(z.rows(), z.cols()), shrunk};
  Matrix out = svd.matrixU().leftCols(rank) * shrunk.head(rank).asDiagonal() * svd.matrixV().leftCols(rank).transpose();
  return {std::move(out), shrunk};
}

double spectral_value(const Vector& sigma, SpectralInner inner) {
  if (inner == SpectralInner::L1) return sigma.sum();
  const double tol = sigma.size() ? 1e-10 * std::max(1.0, sigma[0]) : 0.0;
  return static_cast<double>((sigma.array() > tol).count());
}

}  // namespace

Matrix prox_singular_values(const Matrix& z, double alpha, SpectralInner inner) {
  check_alpha(alpha);
  if (alpha == 0.0 || z.size() == 0) return z;
  return spectral_prox(z, alpha, inner).first;
}

// ---------------------------------------------------------------------------
// Regularizer

Regularizer Regularizer::l1() { return Regularizer(L1{}); }
Regularizer Regularizer::l0() { return Regularizer(L0{}); }
Regularizer Regularizer::lp(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("Regularizer::lp: p must lie in (0, 1)");
  return Regularizer(Lp{p});
}
Regularizer Regularizer::cad(double rho) {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw std::invalid_argument("Regularizer::cad: rho must be positive");
  return Regularizer(Cad{rho});
}
Regularizer Regularizer::group_l2(GroupPartition groups) { return Regularizer(GroupL2{std::move(groups)}); }
Regularizer Regularizer::sq_l2() { return Regularizer(SqL2{}); }
Regularizer Regularizer::nonnegative() { return Regularizer(IndicatorSet{Nonnegative{}}); }
Regularizer Regularizer::sphere(double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("Regularizer::sphere: radius must be positive");
  return Regularizer(IndicatorSet{Sphere{radius}});
}
Regularizer Regularizer::singular_values(SpectralInner inner, Index rows, Index cols) {
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("Regularizer::singular_values: bad shape");
  return Regularizer(SingularValues{inner, rows, cols});
}

bool Regularizer::is_convex() const {
  return std::visit(overloaded{
                        [](const L1&) { return true; },
                        [](const L0&) { return false; },
                        [](const Lp&) { return false; },
                        [](const Cad&) { return false; },
                        [](const GroupL2&) { return true; },
                        [](const SqL2&) { return true; },
                        [](const IndicatorSet& s) { return std::holds_alternative<Nonnegative>(s.set); },
                        [](const SingularValues& s) { return s.inner == SpectralInner::L1; },
                    },
                    kind_);
}

std::string Regularizer::name() const {
  return std::visit(overloaded{
                        [](const L1&) -> std::string { return "l1"; },
                        [](const L0&) -> std::string { return "l0"; },
                        [](const Lp& k) -> std::string {
                          std::ostringstream s;
                          s << "lp(" << k.p << ")";
                          return s.str();
                        },
                        [](const Cad& k) -> std::string {
                          std::ostringstream s;
                          s << "cad(" << k.rho << ")";
                          return s.str();
                        },
                        [](const GroupL2&) -> std::string { return "group_l2"; },
                        [](const SqL2&) -> std::string { return "sq_l2"; },
                        [](const IndicatorSet& s) -> std::string {
                          return std::holds_alternative<Nonnegative>(s.set) ? "nonnegative" : "sphere";
                        },
                        [](const SingularValues& s) -> std::string {
                          return s.inner == SpectralInner::L1 ? "nuclear" : "rank";
                        },
                    },
                    kind_);
}

Vector Regularizer::prox(const Vector& z, double alpha) const {
  return std::visit(
      overloaded{
          [&](const L1&) { return prox_l1(z, alpha); },
          [&](const L0&) { return prox_l0(z, alpha); },
          [&](const Lp& k) { return prox_lp(z, alpha, k.p); },
          [&](const Cad& k) { return prox_cad(z, alpha, k.rho); },
          [&](const GroupL2& k) { return prox_group_l2(z, alpha, k.groups); },
          [&](const SqL2&) { return prox_sq_l2(z, alpha); },
          [&](const IndicatorSet& k) {
            check_alpha(alpha);
            return project_set(z, k.set);
          },
          [&](const SingularValues& k) -> Vector {
            if (z.size() != k.rows * k.cols)
              throw std::invalid_argument("prox: vector size does not match singular-value shape");
            const Matrix out =
                prox_singular_values(Eigen::Map<const Matrix>(z.data(), k.rows, k.cols), alpha, k.inner);
            return Eigen::Map<const Vector>(out.data(), out.size());
          },
      },
      kind_);
}

Regularizer::Evaluated Regularizer::prox_evaluated(const Vector& z, double alpha) const {
  if (const auto* k = std::get_if<SingularValues>(&kind_)) {
    check_alpha(alpha);
    if (z.size() != k->rows * k->cols)
      throw std::invalid_argument("prox: vector size does not match singular-value shape");
    auto [m, sigma] = spectral_prox(Eigen::Map<const Matrix>(z.data(), k->rows, k->cols), alpha, k->inner);
    return {Eigen::Map<const Vector>(m.data(), m.size()), spectral_value(sigma, k->inner)};
  }
  Vector x = prox(z, alpha);
  const double v = value(x);
  return {std::move(x), v};
}

double Regularizer::value(const Vector& z) const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return std::visit(
      overloaded{
          [&](const L1&) { return z.lpNorm<1>(); },
          [&](const L0&) { return static_cast<double>((z.array() != 0.0).count()); },
          [&](const Lp& k) { return z.array().abs().pow(k.p).sum(); },
          [&](const Cad& k) { return z.array().abs().min(k.rho).sum(); },
          [&](const GroupL2& k) {
            double total = 0.0;
            for (Index g = 0; g < k.groups.count(); ++g) {
              double sq = 0.0;
              for (const Index* i = k.groups.group_begin(g); i != k.groups.group_end(g); ++i) sq += z[*i] * z[*i];
              total += std::sqrt(sq);
            }
            return total;
          },
          [&](const SqL2&) { return 0.5 * z.squaredNorm(); },
          [&](const IndicatorSet& k) {
            return std::visit(overloaded{
                                  [&](const Nonnegative&) { return z.minCoeff() >= 0.0 ? 0.0 : inf; },
                                  [&](const Sphere& s) {
                                    return std::abs(z.norm() - s.radius) <= 1e-9 * (1.0 + s.radius) ? 0.0 : inf;
                                  },
                              },
                              k.set);
          },
          [&](const SingularValues& k) {
            const Eigen::Map<const Matrix> m(z.data(), k.rows, k.cols);
            Eigen::BDCSVD<Matrix> svd(m);
            return spectral_value(svd.singularValues(), k.inner);
          },
      },
      kind_);
}

}  // namespace sr3::prox
