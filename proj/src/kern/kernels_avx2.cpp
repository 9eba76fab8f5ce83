#if defined(__x86_64__) || defined(_M_X64)

#include "cdpg/kern/kernels.hpp"

#include <immintrin.h>

#include <cmath>
#include <cstddef>
#include <limits>

// AVX2+FMA variants. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after the runtime CPU check in kernels.cpp.

namespace cdpg::kern::detail {
namespace {

inline double hsum4(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
}

inline double neumaier_add(double s, double x, double& c) {
  double t = s + x;
  if (std::abs(s) >= std::abs(x)) {
    c += (s - t) + x;
  } else {
    c += (x - t) + s;
  }
  return t;
}

double reduce_sum_avx2(const double* x, std::size_t n) {
  // Four independent Neumaier lanes, combined with a scalar Neumaier pass.
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  __m256d vs = _mm256_setzero_pd();
  __m256d vc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(x + i);
    __m256d t = _mm256_add_pd(vs, v);
    __m256d abs_s = _mm256_andnot_pd(sign_mask, vs);
    __m256d abs_v = _mm256_andnot_pd(sign_mask, v);
    __m256d mask = _mm256_cmp_pd(abs_s, abs_v, _CMP_GE_OQ);
    __m256d big = _mm256_blendv_pd(v, vs, mask);
    __m256d small = _mm256_blendv_pd(vs, v, mask);
    vc = _mm256_add_pd(vc, _mm256_add_pd(_mm256_sub_pd(big, t), small));
    vs = t;
  }
  alignas(32) double lane_s[4];
  alignas(32) double lane_c[4];
  _mm256_store_pd(lane_s, vs);
  _mm256_store_pd(lane_c, vc);
  double s = 0.0, c = 0.0;
  for (int k = 0; k < 4; ++k) s = neumaier_add(s, lane_s[k], c);
  for (int k = 0; k < 4; ++k) s = neumaier_add(s, lane_c[k], c);
  for (; i < n; ++i) s = neumaier_add(s, x[i], c);
  return s + c;
}

double reduce_max_avx2(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  if (n >= 4) {
    __m256d vm = _mm256_loadu_pd(x);
    for (i = 4; i + 4 <= n; i += 4) {
      vm = _mm256_max_pd(vm, _mm256_loadu_pd(x + i));
    }
    alignas(32) double lane[4];
    _mm256_store_pd(lane, vm);
    for (int k = 0; k < 4; ++k) {
      if (lane[k] > m) m = lane[k];
    }
  }
  for (; i < n; ++i) {
    if (x[i] > m) m = x[i];
  }
  return m;
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum4(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

void scale_avx2(double* x, double a, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), va));
  }
  for (; i < n; ++i) x[i] *= a;
}

double sum_sq_dev_avx2(const double* x, std::size_t n, double mean) {
  const __m256d vm = _mm256_set1_pd(mean);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), vm);
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum4(acc);
  for (; i < n; ++i) {
    double d = x[i] - mean;
    s += d * d;
  }
  return s;
}

}  // namespace

const KernelTable avx2_table = {
    reduce_sum_avx2, reduce_max_avx2, dot_avx2,
    axpy_avx2,       scale_avx2,      sum_sq_dev_avx2,
};

}  // namespace cdpg::kern::detail

#endif  // x86-64
