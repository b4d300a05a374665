#pragma once

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>

#include "gradflow/grid.hpp"

namespace gradflow::detail {

/// fftw_malloc'd buffer pair matching the alignment the plans were made with.
struct FftBuffers {
  explicit FftBuffers(std::size_t n)
      : real(static_cast<double*>(fftw_malloc(sizeof(double) * n * n))),
        cplx(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n * (n / 2 + 1)))) {}
  ~FftBuffers() {
    fftw_free(real);
    fftw_free(cplx);
  }
  FftBuffers(const FftBuffers&) = delete;
  FftBuffers& operator=(const FftBuffers&) = delete;

  double* real;
  fftw_complex* cplx;
};

/// r2c / c2r plan pair for an n x n grid. Plans are created once under a lock;
/// execution through the new-array interface is thread safe.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    FftBuffers tmp(n);
    const int ni = static_cast<int>(n);
    // FFTW_ESTIMATE keeps the chosen algorithm, and therefore the rounding, identical across runs.
    forward_ = fftw_plan_dft_r2c_2d(ni, ni, tmp.real, tmp.cplx, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_2d(ni, ni, tmp.cplx, tmp.real, FFTW_ESTIMATE);
  }
  ~FftPlan() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  void forward(const RealField& in, SpectralField& out) const {
    FftBuffers& buf = scratch();
    std::copy(in.values().begin(), in.values().end(), buf.real);
    fftw_execute_dft_r2c(forward_, buf.real, buf.cplx);
    auto* src = reinterpret_cast<const std::complex<double>*>(buf.cplx);
    std::copy(src, src + n_ * (n_ / 2 + 1), out.coefficients().begin());
  }

  /// Unnormalized inverse; the caller divides by n^2.
  void inverse(const SpectralField& in, RealField& out) const {
    FftBuffers& buf = scratch();
    auto* dst = reinterpret_cast<std::complex<double>*>(buf.cplx);
    std::copy(in.coefficients().begin(), in.coefficients().end(), dst);
    fftw_execute_dft_c2r(inverse_, buf.cplx, buf.real);
    std::copy(buf.real, buf.real + n_ * n_, out.values().begin());
  }

 private:
  FftBuffers& scratch() const {
    thread_local std::map<std::size_t, std::unique_ptr<FftBuffers>> buffers;
    auto& slot = buffers[n_];
    if (!slot) slot = std::make_unique<FftBuffers>(n_);
    return *slot;
  }

  std::size_t n_;
  fftw_plan forward_;
  fftw_plan inverse_;
};

inline const FftPlan& fft_plan(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, std::unique_ptr<FftPlan>> plans;
  std::lock_guard lock(mutex);
  auto& slot = plans[n];
  if (!slot) slot = std::make_unique<FftPlan>(n);
  return *slot;
}

}  // namespace gradflow::detail
