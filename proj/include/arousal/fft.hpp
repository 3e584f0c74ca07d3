#pragma once

// Thin RAII wrapper over FFTW's real-input transforms. Plans are built once
// per size; execution uses the new-array interface so one plan can serve any
// aligned buffer pair. FFTW's planner is not thread-safe, hence the mutex.

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>

#include <fftw3.h>

#include "arousal/error.hpp"

namespace arousal {

namespace detail {
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

template <typename T>
struct FftwBuffer {
  T* ptr = nullptr;
  std::size_t size = 0;

  FftwBuffer() = default;
  explicit FftwBuffer(std::size_t n) : ptr(static_cast<T*>(fftw_malloc(sizeof(T) * n))), size(n) {
    if (ptr == nullptr) throw std::bad_alloc();
  }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  FftwBuffer(FftwBuffer&& o) noexcept : ptr(o.ptr), size(o.size) { o.ptr = nullptr; o.size = 0; }
  FftwBuffer& operator=(FftwBuffer&& o) noexcept {
    if (this != &o) {
      fftw_free(ptr);
      ptr = o.ptr; size = o.size;
      o.ptr = nullptr; o.size = 0;
    }
    return *this;
  }
  ~FftwBuffer() { fftw_free(ptr); }
};
}  // namespace detail

// Forward (r2c) and inverse (c2r) transforms of a fixed length n. Not
// shareable across threads mid-call: each thread owns its own instance.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n), real_(n), spec_(n / 2 + 1) {
    if (n == 0) throw Error(ErrorKind::InvalidInput, "FFT length must be positive");
    std::lock_guard lock(detail::fftw_planner_mutex());
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), real_.ptr, spec_.ptr, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec_.ptr, real_.ptr, FFTW_ESTIMATE);
  }

  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  RealFft(RealFft&& o) noexcept
      : n_(o.n_), real_(std::move(o.real_)), spec_(std::move(o.spec_)),
        forward_(o.forward_), inverse_(o.inverse_) {
    o.forward_ = nullptr;
    o.inverse_ = nullptr;
  }
  RealFft& operator=(RealFft&&) = delete;

  ~RealFft() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    if (forward_) fftw_destroy_plan(forward_);
    if (inverse_) fftw_destroy_plan(inverse_);
  }

  std::size_t size() const noexcept { return n_; }
  std::size_t spectrum_size() const noexcept { return n_ / 2 + 1; }

  // Time-domain work buffer (length n).
  std::span<double> real() noexcept { return {real_.ptr, n_}; }
  // Half spectrum (length n/2+1), unnormalized.
  std::span<std::complex<double>> spectrum() noexcept {
    return {reinterpret_cast<std::complex<double>*>(spec_.ptr), n_ / 2 + 1};
  }

  // real() -> spectrum(). real() is preserved.
  void forward() { fftw_execute_dft_r2c(forward_, real_.ptr, spec_.ptr); }
  // spectrum() -> real(), unnormalized (scaled by n). spectrum() is destroyed.
  void inverse() { fftw_execute_dft_c2r(inverse_, spec_.ptr, real_.ptr); }

  // Bytes held by the two work buffers.
  std::size_t buffer_bytes() const noexcept {
    return n_ * sizeof(double) + (n_ / 2 + 1) * sizeof(fftw_complex);
  }

 private:
  std::size_t n_;
  detail::FftwBuffer<double> real_;
  detail::FftwBuffer<fftw_complex> spec_;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

}  // namespace arousal
