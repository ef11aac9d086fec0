#pragma once

// Thin FFTW wrapper for real 2-D transforms of column-major images.  A
// rows x cols column-major image is the row-major array [cols][rows], so the
// half spectrum has cols * (rows/2 + 1) entries.

#include <sr3/operators.hpp>

#include <fftw3.h>

#include <complex>
#include <vector>

namespace sr3::detail {

using Complex = std::complex<double>;

class RealFft2D {
 public:
  explicit RealFft2D(ImageShape shape);
  ~RealFft2D();
  RealFft2D(const RealFft2D&) = delete;
  RealFft2D& operator=(const RealFft2D&) = delete;

  Index spectrum_size() const { return shape_.cols * (shape_.rows / 2 + 1); }
  std::vector<Complex> forward(const Vector& image) const;
  /// Unnormalized inverse (scales by rows*cols relative to a true inverse).
  Vector inverse(std::vector<Complex> spectrum) const;

 private:
  ImageShape shape_;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

/// Full complex 2-D DFT of a real image, indexed [col_freq * rows + row_freq].
std::vector<Complex> full_spectrum(const Matrix& image);

}  // namespace sr3::detail
