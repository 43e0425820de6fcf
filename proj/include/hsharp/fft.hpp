#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <vector>

#include "hsharp/error.hpp"

namespace hsharp {

namespace detail {
// FFTW's planner is not reentrant; execution on distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Real 2-D DFT of a fixed rows x cols grid. Spectra use the half-plane
/// layout rows x (cols/2 + 1). Unnormalized forward, inverse scaled by 1/N.
/// Plans are built with FFTW_ESTIMATE so results do not depend on timing.
class Fft2d {
 public:
  using Complex = std::complex<double>;

  Fft2d(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), half_(cols / 2 + 1) {
    if (rows == 0 || cols == 0) fail_validation("FFT grid must be non-empty");
    real_ = static_cast<double*>(fftw_malloc(sizeof(double) * rows_ * cols_));
    spec_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * rows_ * half_));
    if (!real_ || !spec_) {
      release();
      throw std::bad_alloc();
    }
    std::lock_guard lock(detail::fftw_planner_mutex());
    forward_ = fftw_plan_dft_r2c_2d(static_cast<int>(rows_), static_cast<int>(cols_), real_, spec_,
                                    FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_2d(static_cast<int>(rows_), static_cast<int>(cols_), spec_, real_,
                                    FFTW_ESTIMATE);
  }

  Fft2d(const Fft2d&) = delete;
  Fft2d& operator=(const Fft2d&) = delete;
  ~Fft2d() { release(); }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t spectrum_size() const noexcept { return rows_ * half_; }
  std::size_t half_cols() const noexcept { return half_; }

  void forward(std::span<const double> in, std::span<Complex> out) {
    std::copy(in.begin(), in.end(), real_);
    fftw_execute(forward_);
    for (std::size_t i = 0; i < spectrum_size(); ++i) out[i] = {spec_[i][0], spec_[i][1]};
  }

  void inverse(std::span<const Complex> in, std::span<double> out) {
    for (std::size_t i = 0; i < spectrum_size(); ++i) {
      spec_[i][0] = in[i].real();
      spec_[i][1] = in[i].imag();
    }
    fftw_execute(inverse_);
    const double scale = 1.0 / static_cast<double>(rows_ * cols_);
    for (std::size_t i = 0; i < rows_ * cols_; ++i) out[i] = real_[i] * scale;
  }

  /// Spectrum of a small odd-sided kernel placed with its center on (0,0),
  /// i.e. the transfer function of the cyclic convolution it defines.
  std::vector<Complex> kernel_spectrum(std::span<const double> kernel, std::size_t side) {
    if (side > rows_ || side > cols_) fail_validation("kernel larger than FFT grid");
    std::vector<double> img(rows_ * cols_, 0.0);
    const auto c = static_cast<std::ptrdiff_t>(side / 2);
    for (std::size_t u = 0; u < side; ++u)
      for (std::size_t v = 0; v < side; ++v) {
        const std::size_t r = wrap(static_cast<std::ptrdiff_t>(u) - c, rows_);
        const std::size_t q = wrap(static_cast<std::ptrdiff_t>(v) - c, cols_);
        img[r * cols_ + q] += kernel[u * side + v];
      }
    std::vector<Complex> out(spectrum_size());
    forward(img, out);
    return out;
  }

  static std::size_t wrap(std::ptrdiff_t i, std::size_t n) {
    const auto m = static_cast<std::ptrdiff_t>(n);
    std::ptrdiff_t r = i % m;
    return static_cast<std::size_t>(r < 0 ? r + m : r);
  }

 private:
  void release() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    if (forward_) fftw_destroy_plan(forward_);
    if (inverse_) fftw_destroy_plan(inverse_);
    forward_ = inverse_ = nullptr;
    if (real_) fftw_free(real_);
    if (spec_) fftw_free(spec_);
    real_ = nullptr;
    spec_ = nullptr;
  }

  std::size_t rows_, cols_, half_;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

}  // namespace hsharp
