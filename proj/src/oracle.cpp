#include <sr3/oracle.hpp>

#include <Eigen/QR>

#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sr3::oracle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPolishWidth = 1e-10;

template <class F>
double golden_section(const F& f, double lo, double hi) {
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - ratio * (hi - lo);
  double d = lo + ratio * (hi - lo);
  double fc = f(c), fd = f(d);
  while (hi - lo > kPolishWidth) {
    if (fc <= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - ratio * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + ratio * (hi - lo);
      fd = f(d);
    }
  }
  return 0.5 * (lo + hi);
}

// Scalar minimization shared by the grid oracles: grid, candidates, polish.
template <class F>
std::pair<double, double> minimize_scalar(const F& f, double lo, double hi, double step,
                                          std::initializer_list<double> candidates) {
  if (!(step > 0.0)) throw std::invalid_argument("grid oracle: step must be positive");
  const auto kmin = static_cast<long long>(std::floor(lo / step));
  const auto kmax = static_cast<long long>(std::ceil(hi / step));
  double best_x = 0.0, best_f = kInf;
  for (long long k = kmin; k <= kmax; ++k) {
    const double x = static_cast<double>(k) * step;
    const double v = f(x);
    if (v < best_f) {
      best_f = v;
      best_x = x;
    }
  }
  const double grid_x = best_x;
  const double polished = golden_section(f, std::max(lo, grid_x - step), std::min(hi, grid_x + step));
  auto consider = [&](double x) {
    if (x < lo || x > hi) return;
    const double v = f(x);
    if (v < best_f) {
      best_f = v;
      best_x = x;
    }
  };
  consider(polished);
  for (double c : candidates) consider(c);
  return {best_x, best_f};
}

std::string describe(double step) { return "grid step " + std::to_string(step) + " + golden polish"; }

}  // namespace

double Penalty::operator()(double x) const {
  switch (kind) {
    case Kind::L1:
      return std::fabs(x);
    case Kind::L0:
      return x != 0.0 ? 1.0 : 0.0;
    case Kind::Lp:
      return std::pow(std::fabs(x), param);
    case Kind::Cad:
      return std::fabs(x) < param ? std::fabs(x) : param;
    case Kind::SqL2:
      return 0.5 * x * x;
    case Kind::Nonnegative:
      return x >= 0.0 ? 0.0 : kInf;
  }
  return kInf;
}

OracleResult grid_prox(const Penalty& penalty, double z, double alpha, double grid_step) {
  const double bound = std::fabs(z) + 1.0;
  const auto objective = [&](double x) {
    const double r = penalty(x);
    // alpha = 0 with an infinite penalty still excludes the point.
    const double reg = r == kInf ? kInf : alpha * r;
    return 0.5 * (x - z) * (x - z) + reg;
  };
  const double rho = penalty.kind == Penalty::Kind::Cad ? penalty.param : 0.0;
  const auto [x, f] = minimize_scalar(objective, -bound, bound, grid_step, {0.0, rho, -rho, z});
  OracleResult out;
  out.argmin = Vector::Constant(1, x);
  out.objective = f;
  out.method = describe(grid_step);
  return out;
}

OracleResult grid_prox_group(const Vector& y, double alpha, double grid_step) {
  const double norm = std::sqrt(y.dot(y));
  const auto objective = [&](double t) { return 0.5 * (t - norm) * (t - norm) + alpha * std::fabs(t); };
  const auto [t, f] = minimize_scalar(objective, 0.0, norm + 1.0, grid_step, {0.0, norm});
  OracleResult out;
  out.argmin = norm > 0.0 ? Vector(y * (t / norm)) : Vector(Vector::Zero(y.size()));
  out.objective = f;
  out.method = "radial " + describe(grid_step);
  return out;
}

OracleResult grid_project_circle(const Vector& y, double radius, double grid_step) {
  if (y.size() != 2) throw std::invalid_argument("grid_project_circle: expects a 2-vector");
  const double pi = std::acos(-1.0);
  const auto objective = [&](double theta) {
    const double dx = radius * std::cos(theta) - y[0];
    const double dy = radius * std::sin(theta) - y[1];
    return 0.5 * (dx * dx + dy * dy);
  };
  const auto [theta, f] = minimize_scalar(objective, -pi, pi, grid_step, {});
  OracleResult out;
  out.argmin = Vector(2);
  out.argmin << radius * std::cos(theta), radius * std::sin(theta);
  out.objective = f;
  out.method = "angle " + describe(grid_step);
  return out;
}

OracleResult exhaustive_l0(const Matrix& A, const Vector& b, double lambda) {
  const Index d = A.cols();
  if (d > 15) throw std::invalid_argument("exhaustive_l0: at most 15 columns are supported");
  if (A.rows() != b.size()) throw std::invalid_argument("exhaustive_l0: dimension mismatch");
  OracleResult out;
  out.argmin = Vector::Zero(d);
  out.objective = 0.5 * b.squaredNorm();
  int best_size = 0;
  const unsigned count = 1u << d;
  for (unsigned mask = 1; mask < count; ++mask) {
    const int size = std::popcount(mask);
    Matrix sub(A.rows(), size);
    for (Index j = 0, c = 0; j < d; ++j)
      if (mask & (1u << j)) sub.col(c++) = A.col(j);
    const Vector coef = sub.colPivHouseholderQr().solve(b);
    const double value = 0.5 * (sub * coef - b).squaredNorm() + lambda * size;
    const double slack = 1e-12 * (1.0 + std::fabs(out.objective));
    if (value < out.objective - slack || (std::fabs(value - out.objective) <= slack && size < best_size)) {
      out.objective = value;
      best_size = size;
      out.argmin.setZero();
      for (Index j = 0, c = 0; j < d; ++j)
        if (mask & (1u << j)) out.argmin[j] = coef[c++];
    }
  }
  out.method = "enumerated " + std::to_string(count) + " supports";
  return out;
}

Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& w, double h) {
  Vector grad(w.size());
  Vector probe = w;
  for (Index i = 0; i < w.size(); ++i) {
    probe[i] = w[i] + h;
    const double up = f(probe);
    probe[i] = w[i] - h;
    const double down = f(probe);
    probe[i] = w[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace sr3::oracle
