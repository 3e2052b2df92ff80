#pragma once

// Thin RAII layer over FFTW.  Plans are created once under a global lock
// (the FFTW planner is not thread-safe) and then executed concurrently on
// caller-owned buffers through the new-array interface.

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>

#include <fftw3.h>

#include "ssx/error.hpp"

namespace ssx::fft {

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

/// SIMD-aligned complex buffer.
class Buffer {
 public:
  Buffer() = default;
  explicit Buffer(std::size_t n)
      : data_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))), size_(n) {
    if (n > 0 && !data_) throw ResourceError("fftw_malloc failed");
  }
  fftw_complex* data() noexcept { return data_.get(); }
  std::size_t size() const noexcept { return size_; }
  std::complex<double>& operator[](std::size_t i) noexcept {
    return reinterpret_cast<std::complex<double>*>(data_.get())[i];
  }

 private:
  std::unique_ptr<fftw_complex, FftwFree> data_;
  std::size_t size_ = 0;
};

/// Forward complex DFT of a fixed length, executable from any thread.
class Plan {
 public:
  explicit Plan(std::size_t n) : n_(n) {
    Buffer in(n), out(n);
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_1d(static_cast<int>(n), in.data(), out.data(), FFTW_FORWARD,
                             FFTW_ESTIMATE);
    if (!plan_) throw ResourceError("FFTW could not create a plan");
  }
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;

  std::size_t size() const noexcept { return n_; }

  void execute(Buffer& in, Buffer& out) const { fftw_execute_dft(plan_, in.data(), out.data()); }

 private:
  std::size_t n_;
  fftw_plan plan_ = nullptr;
};

}  // namespace ssx::fft
