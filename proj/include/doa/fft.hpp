#pragma once

// Thin RAII layer over FFTW's real-to-complex transforms.
//
// Plans are created once per size under a mutex (the FFTW planner is not
// reentrant) and executed through the new-array interface, which is safe to
// call concurrently as long as every thread owns its own buffers.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <new>
#include <span>

namespace doa::fft {

namespace detail {
struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};
}  // namespace detail

/// SIMD-aligned heap buffer allocated with fftw_malloc.
template <typename T>
class AlignedBuffer {
 public:
  AlignedBuffer() = default;
  explicit AlignedBuffer(std::size_t n)
      : data_(static_cast<T*>(fftw_malloc(sizeof(T) * (n == 0 ? 1 : n)))), size_(n) {
    if (!data_) throw std::bad_alloc();
    for (std::size_t i = 0; i < n; ++i) data_.get()[i] = T{};
  }

  T* data() noexcept { return data_.get(); }
  const T* data() const noexcept { return data_.get(); }
  std::size_t size() const noexcept { return size_; }
  T& operator[](std::size_t i) noexcept { return data_.get()[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_.get()[i]; }
  std::span<T> span() noexcept { return {data_.get(), size_}; }
  std::span<const T> span() const noexcept { return {data_.get(), size_}; }

 private:
  std::unique_ptr<T, detail::FftwFree> data_;
  std::size_t size_ = 0;
};

using Complex = std::complex<double>;
static_assert(sizeof(Complex) == sizeof(fftw_complex));

/// Forward and inverse real transform of length n (unnormalized, like FFTW).
class RealPlan {
 public:
  RealPlan(const RealPlan&) = delete;
  RealPlan& operator=(const RealPlan&) = delete;
  ~RealPlan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
  }

  std::size_t size() const noexcept { return n_; }
  std::size_t spectrum_size() const noexcept { return n_ / 2 + 1; }

  /// in: n reals, out: n/2+1 bins. Both must come from AlignedBuffer.
  void forward(double* in, Complex* out) const {
    fftw_execute_dft_r2c(forward_, in, reinterpret_cast<fftw_complex*>(out));
  }

  /// in: n/2+1 bins (overwritten), out: n reals scaled by n.
  void inverse(Complex* in, double* out) const {
    fftw_execute_dft_c2r(inverse_, reinterpret_cast<fftw_complex*>(in), out);
  }

  /// Shared plan for size n; created on first use.
  static std::shared_ptr<const RealPlan> get(std::size_t n) {
    // Mutex first so it outlives the cache during static destruction.
    std::mutex& mutex = planner_mutex();
    static std::map<std::size_t, std::shared_ptr<const RealPlan>> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    auto plan = std::shared_ptr<const RealPlan>(new RealPlan(n, PlannerLocked{}));
    cache.emplace(n, plan);
    return plan;
  }

 private:
  struct PlannerLocked {};
  RealPlan(std::size_t n, PlannerLocked) : n_(n) {
    AlignedBuffer<double> real(n);
    AlignedBuffer<Complex> spectrum(n / 2 + 1);
    auto* c = reinterpret_cast<fftw_complex*>(spectrum.data());
    const int size = static_cast<int>(n);
    forward_ = fftw_plan_dft_r2c_1d(size, real.data(), c, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(size, c, real.data(), FFTW_ESTIMATE);
    if (!forward_ || !inverse_) throw std::bad_alloc();
  }

  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }

  std::size_t n_;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

/// Smallest power of two >= n.
inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace doa::fft
