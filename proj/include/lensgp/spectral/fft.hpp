#pragma once

// Thin FFTW wrapper.
//
// Transform convention (fixed repo-wide):
//   forward   F[f]_m = sum_j f_j exp(-i k_m (x_j - x_0))      (unnormalized)
//   backward  f_j    = (1/M) sum_m F_m exp(+i k_m (x_j - x_0))
// so a Fourier multiplier m(k) acts as backward(m * forward(f)). With this
// convention d/dx is the multiplier i*k, and the free flow i v_t = -v_xx / 2
// is the multiplier exp(-i k^2 t / 2).
//
// Plans are created with FFTW_ESTIMATE | FFTW_UNALIGNED so the algorithm is a
// pure function of the shape (bit-reproducible runs) and one plan can be
// executed on any buffer. Planning is serialized; execution is thread-safe.

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "lensgp/spectral/grid.hpp"

namespace lensgp::fft {

namespace detail {

struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

class PlanCache {
public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  PlanPair get(const std::vector<int>& shape) {
    std::lock_guard lock(mutex_);
    if (auto it = plans_.find(shape); it != plans_.end()) return it->second;
    std::size_t n = 1;
    for (int s : shape) n *= static_cast<std::size_t>(s);
    auto* scratch = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    PlanPair p;
    p.forward = fftw_plan_dft(static_cast<int>(shape.size()), shape.data(), scratch, scratch,
                              FFTW_FORWARD, flags);
    p.backward = fftw_plan_dft(static_cast<int>(shape.size()), shape.data(), scratch, scratch,
                               FFTW_BACKWARD, flags);
    fftw_free(scratch);
    plans_.emplace(shape, p);
    return p;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [shape, p] : plans_) {
      fftw_destroy_plan(p.forward);
      fftw_destroy_plan(p.backward);
    }
  }

  std::mutex mutex_;
  std::map<std::vector<int>, PlanPair> plans_;
};

inline fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace detail

/// In-place unnormalized forward transform of a row-major array.
inline void forward(std::span<cplx> data, const std::vector<int>& shape) {
  auto p = detail::PlanCache::instance().get(shape);
  fftw_execute_dft(p.forward, detail::as_fftw(data.data()), detail::as_fftw(data.data()));
}

/// In-place normalized inverse transform.
inline void backward(std::span<cplx> data, const std::vector<int>& shape) {
  auto p = detail::PlanCache::instance().get(shape);
  fftw_execute_dft(p.backward, detail::as_fftw(data.data()), detail::as_fftw(data.data()));
  const double s = 1.0 / static_cast<double>(data.size());
  for (auto& z : data) z *= s;
}

inline void forward(WaveField& f) { forward(f.span(), f.grid.shape()); }
inline void backward(WaveField& f) { backward(f.span(), f.grid.shape()); }

}  // namespace lensgp::fft
