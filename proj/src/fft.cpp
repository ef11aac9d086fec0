#include "fft.hpp"

#include <mutex>
#include <stdexcept>

namespace sr3::detail {

namespace {

// The FFTW planner is not thread-safe; execution with new arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

fftw_complex* as_fftw(Complex* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace

RealFft2D::RealFft2D(ImageShape shape) : shape_(shape) {
  if (shape.rows <= 0 || shape.cols <= 0) throw std::invalid_argument("RealFft2D: empty shape");
  const int n0 = static_cast<int>(shape.cols), n1 = static_cast<int>(shape.rows);
  std::vector<double> real(static_cast<std::size_t>(shape.size()));
  std::vector<Complex> spec(static_cast<std::size_t>(spectrum_size()));
  std::lock_guard lock(planner_mutex());
  forward_ = fftw_plan_dft_r2c_2d(n0, n1, real.data(), as_fftw(spec.data()), FFTW_ESTIMATE | FFTW_UNALIGNED);
  inverse_ = fftw_plan_dft_c2r_2d(n0, n1, as_fftw(spec.data()), real.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!forward_ || !inverse_) throw std::runtime_error("RealFft2D: FFTW planning failed");
}

RealFft2D::~RealFft2D() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(forward_);
  fftw_destroy_plan(inverse_);
}

std::vector<Complex> RealFft2D::forward(const Vector& image) const {
  if (image.size() != shape_.size()) throw std::invalid_argument("RealFft2D: size mismatch");
  Vector copy = image;
  std::vector<Complex> out(static_cast<std::size_t>(spectrum_size()));
  fftw_execute_dft_r2c(forward_, copy.data(), as_fftw(out.data()));
  return out;
}

Vector RealFft2D::inverse(std::vector<Complex> spectrum) const {
  if (static_cast<Index>(spectrum.size()) != spectrum_size())
    throw std::invalid_argument("RealFft2D: spectrum size mismatch");
  Vector out(shape_.size());
  fftw_execute_dft_c2r(inverse_, as_fftw(spectrum.data()), out.data());
  return out;
}

std::vector<Complex> full_spectrum(const Matrix& image) {
  const Index m = image.rows(), n = image.cols();
  std::vector<Complex> in(static_cast<std::size_t>(m * n));
  for (Index k = 0; k < m * n; ++k) in[static_cast<std::size_t>(k)] = image.data()[k];
  std::vector<Complex> out(in.size());
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_2d(static_cast<int>(n), static_cast<int>(m), as_fftw(in.data()), as_fftw(out.data()),
                            FFTW_FORWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

}  // namespace sr3::detail
