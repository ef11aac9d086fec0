#pragma once

// Proximal operators and projections for the regularizers used by the
// relaxed solvers.  Every operator is out-of-place and pure: inputs are never
// mutated and no state is shared, so they can be called concurrently.
//
// Conventions: prox_{alpha r}(z) = argmin_x 0.5 * (x - z)^2 + alpha * r(x),
// applied per coordinate for separable penalties.  alpha = 0 is the identity
// for every kind.

#include <sr3/types.hpp>

#include <string>
#include <variant>
#include <vector>

namespace sr3::prox {

/// Partition of {0, ..., dim-1} into disjoint groups, stored CSR-style.
class GroupPartition {
 public:
  GroupPartition() = default;

  /// Throws std::invalid_argument unless `groups` covers every index in
  /// [0, dim) exactly once.
  GroupPartition(const std::vector<std::vector<Index>>& groups, Index dim);

  /// `count` consecutive groups of `size` indices each.
  static GroupPartition contiguous(Index count, Index size);

  /// Groups {p, p + stride, ..., p + (arity-1)*stride} for p < stride; the
  /// per-pixel (w_x, w_y) pairing of isotropic TV uses arity 2.
  static GroupPartition interleaved(Index stride, Index arity);

  Index dim() const { return dim_; }
  Index count() const { return static_cast<Index>(offsets_.size()) - 1; }
  Index group_size(Index g) const { return offsets_[g + 1] - offsets_[g]; }
  const Index* group_begin(Index g) const { return indices_.data() + offsets_[g]; }
  const Index* group_end(Index g) const { return indices_.data() + offsets_[g + 1]; }

 private:
  Index dim_ = 0;
  std::vector<Index> offsets_{0};
  std::vector<Index> indices_;
};

struct L1 {};
struct L0 {};
struct Lp {
  double p;
};
/// Clipped absolute deviation r(x) = min(|x|, rho).
struct Cad {
  double rho;
};
struct GroupL2 {
  GroupPartition groups;
};
/// r(x) = 0.5 * x^2, whose prox is a scaling.
struct SqL2 {};
struct Nonnegative {};
struct Sphere {
  double radius;
};
using ConstraintSet = std::variant<Nonnegative, Sphere>;
struct IndicatorSet {
  ConstraintSet set;
};
enum class SpectralInner { L1, L0 };
/// Penalty on the singular values of a rows x cols matrix stored
/// column-major in a vector.
struct SingularValues {
  SpectralInner inner;
  Index rows;
  Index cols;
};

class Regularizer {
 public:
  using Kind = std::variant<L1, L0, Lp, Cad, GroupL2, SqL2, IndicatorSet, SingularValues>;

  static Regularizer l1();
  static Regularizer l0();
  static Regularizer lp(double p);
  static Regularizer cad(double rho);
  static Regularizer group_l2(GroupPartition groups);
  static Regularizer sq_l2();
  static Regularizer nonnegative();
  static Regularizer sphere(double radius);
  static Regularizer singular_values(SpectralInner inner, Index rows, Index cols);

  const Kind& kind() const { return kind_; }
  bool is_convex() const;
  std::string name() const;

  Vector prox(const Vector& z, double alpha) const;

  struct Evaluated {
    Vector x;
    double value = 0.0;  // R(x)
  };
  /// prox together with R at the result; for singular-value penalties this
  /// reuses the SVD of the prox instead of computing a second one.
  Evaluated prox_evaluated(const Vector& z, double alpha) const;

  /// R(z).  Indicators evaluate to 0 on the set and +inf off it.
  double value(const Vector& z) const;

 private:
  explicit Regularizer(Kind kind) : kind_(std::move(kind)) {}
  Kind kind_;
};

Vector prox_l1(const Vector& z, double alpha);
Vector prox_l0(const Vector& z, double alpha);
/// Global minimizer per coordinate of 0.5/alpha (x - z)^2 + |x|^p via the
/// inflection-point test and a safeguarded Newton iteration.  Throws
/// NumericalError if Newton does not converge within its iteration cap.
Vector prox_lp(const Vector& z, double alpha, double p);
Vector prox_cad(const Vector& z, double alpha, double rho);
Vector prox_group_l2(const Vector& z, double alpha, const GroupPartition& groups);
Vector prox_sq_l2(const Vector& z, double alpha);
/// Euclidean projection.  The zero vector projects onto radius * e_0 for the
/// sphere; any point of the sphere is a valid projection there.
Vector project_set(const Vector& z, const ConstraintSet& set);
Matrix prox_singular_values(const Matrix& z, double alpha, SpectralInner inner);

double prox_lp_scalar(double z, double alpha, double p);
double prox_cad_scalar(double z, double alpha, double rho);

}  // namespace sr3::prox
