#pragma once

#include <fftw3.h>

#include <cstring>
#include <map>
#include <mutex>

#include "convdl/domain.hpp"

namespace convdl::detail {

// RAII wrappers over fftw_malloc'd buffers so new-array execution keeps the
// alignment the cached plans were created with.
struct RealBuf {
  double* p = nullptr;
  index_t n = 0;
  explicit RealBuf(index_t size) : n(size) {
    p = static_cast<double*>(fftw_malloc(sizeof(double) * size));
  }
  ~RealBuf() { fftw_free(p); }
  RealBuf(const RealBuf&) = delete;
  RealBuf& operator=(const RealBuf&) = delete;
  void zero() { std::memset(p, 0, sizeof(double) * n); }
};

struct CplxBuf {
  fftw_complex* p = nullptr;
  index_t n = 0;
  explicit CplxBuf(index_t size) : n(size) {
    p = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * size));
  }
  ~CplxBuf() { fftw_free(p); }
  CplxBuf(const CplxBuf&) = delete;
  CplxBuf& operator=(const CplxBuf&) = delete;
  void zero() { std::memset(p, 0, sizeof(fftw_complex) * n); }
};

// Cached r2c/c2r plan pairs per padded grid shape. Plan creation is not
// thread-safe in FFTW, so it is serialized; execution via the new-array API
// is safe from any thread.
class FftPlans {
 public:
  struct Entry {
    fftw_plan fwd = nullptr;  // r2c
    fftw_plan bwd = nullptr;  // c2r (destroys its complex input)
    index_t real_n = 0;
    index_t cplx_n = 0;
  };

  static FftPlans& instance() {
    static FftPlans plans;
    return plans;
  }

  const Entry& get(int d, const Pos& m) {
    std::array<index_t, 4> key{d, m[0], m[1], m[2]};
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;

    Entry e;
    e.real_n = 1;
    for (int i = 0; i < d; ++i) e.real_n *= m[i];
    e.cplx_n = e.real_n / m[d - 1] * (m[d - 1] / 2 + 1);

    int n[kMaxDim];
    for (int i = 0; i < d; ++i) n[i] = static_cast<int>(m[i]);
    RealBuf scratch_r(e.real_n);
    CplxBuf scratch_c(e.cplx_n);
    e.fwd = fftw_plan_dft_r2c(d, n, scratch_r.p, scratch_c.p, FFTW_ESTIMATE);
    e.bwd = fftw_plan_dft_c2r(d, n, scratch_c.p, scratch_r.p, FFTW_ESTIMATE);
    return cache_.emplace(key, e).first->second;
  }

  void forward(const Entry& e, double* in, fftw_complex* out) const {
    fftw_execute_dft_r2c(e.fwd, in, out);
  }
  void backward(const Entry& e, fftw_complex* in, double* out) const {
    fftw_execute_dft_c2r(e.bwd, in, out);
  }

 private:
  FftPlans() = default;
  std::mutex mu_;
  std::map<std::array<index_t, 4>, Entry> cache_;
};

inline void cplx_mul_acc(fftw_complex* acc, const fftw_complex* a,
                         const fftw_complex* b, index_t n) {
  for (index_t i = 0; i < n; ++i) {
    acc[i][0] += a[i][0] * b[i][0] - a[i][1] * b[i][1];
    acc[i][1] += a[i][0] * b[i][1] + a[i][1] * b[i][0];
  }
}

// acc += a * conj(b)
inline void cplx_mul_conj_acc(fftw_complex* acc, const fftw_complex* a,
                              const fftw_complex* b, index_t n) {
  for (index_t i = 0; i < n; ++i) {
    acc[i][0] += a[i][0] * b[i][0] + a[i][1] * b[i][1];
    acc[i][1] += a[i][1] * b[i][0] - a[i][0] * b[i][1];
  }
}

}  // namespace convdl::detail
