// AVX2 + FMA variants of the dense kernels.  This file is the only one built
// with -mavx2 -mfma; callers reach it through the dispatch table only after a
// runtime CPU check.
#include <immintrin.h>

#include <cstddef>

#include "defi/kernels.hpp"

namespace defi::kernels::detail {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  std::size_t i = 0;
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double dot3_avx2(const double* x, const double* y, const double* w, std::size_t n) {
  std::size_t i = 0;
  __m256d acc = _mm256_setzero_pd();
  for (; i + 4 <= n; i += 4) {
    __m256d xy = _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    acc = _mm256_fmadd_pd(xy, _mm256_loadu_pd(w + i), acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i] * y[i] * w[i];
  return s;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  std::size_t i = 0;
  __m256d va = _mm256_set1_pd(a);
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

double nrm2_sq_avx2(const double* x, std::size_t n) {
  std::size_t i = 0;
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  for (; i + 8 <= n; i += 8) {
    __m256d v0 = _mm256_loadu_pd(x + i);
    __m256d v1 = _mm256_loadu_pd(x + i + 4);
    acc0 = _mm256_fmadd_pd(v0, v0, acc0);
    acc1 = _mm256_fmadd_pd(v1, v1, acc1);
  }
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(x + i);
    acc0 = _mm256_fmadd_pd(v, v, acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

void scal_avx2(double a, double* x, std::size_t n) {
  std::size_t i = 0;
  __m256d va = _mm256_set1_pd(a);
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= a;
}

constexpr KernelTable avx2_kernels{dot_avx2, dot3_avx2, axpy_avx2, nrm2_sq_avx2,
                                   scal_avx2};

}  // namespace

const KernelTable& avx2_table() { return avx2_kernels; }

}  // namespace defi::kernels::detail
