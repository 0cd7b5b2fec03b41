// SPDX-License-Identifier: Apache-2.0
//
// AVX2+FMA kernels for 64-bit reals. This translation unit is compiled with
// -mavx2 -mfma; nothing here may run before cpu_supports(Isa::avx2) is true.
#include "enrol/simd/kernels.hpp"

#if defined(ENROL_HAVE_AVX2) && !defined(ENROL_REAL_FLOAT)

#include <immintrin.h>

#include <algorithm>
#include <vector>

namespace enrol::simd::avx2 {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  if (i + 4 <= n) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    i += 4;
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Register block: 4 rows of C by 8 columns, accumulated over the full depth.
// B rows are walked in column tiles so a tile stays resident in L2.
constexpr std::size_t kColumnTile = 256;

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  for (std::size_t j0 = 0; j0 < n; j0 += kColumnTile) {
    const std::size_t j1 = std::min(n, j0 + kColumnTile);
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
      const double* a0 = a + (i + 0) * k;
      const double* a1 = a + (i + 1) * k;
      const double* a2 = a + (i + 2) * k;
      const double* a3 = a + (i + 3) * k;
      double* c0 = c + (i + 0) * n;
      double* c1 = c + (i + 1) * n;
      double* c2 = c + (i + 2) * n;
      double* c3 = c + (i + 3) * n;
      std::size_t j = j0;
      for (; j + 8 <= j1; j += 8) {
        __m256d r00 = _mm256_loadu_pd(c0 + j), r01 = _mm256_loadu_pd(c0 + j + 4);
        __m256d r10 = _mm256_loadu_pd(c1 + j), r11 = _mm256_loadu_pd(c1 + j + 4);
        __m256d r20 = _mm256_loadu_pd(c2 + j), r21 = _mm256_loadu_pd(c2 + j + 4);
        __m256d r30 = _mm256_loadu_pd(c3 + j), r31 = _mm256_loadu_pd(c3 + j + 4);
        for (std::size_t p = 0; p < k; ++p) {
          const __m256d b0 = _mm256_loadu_pd(b + p * n + j);
          const __m256d b1 = _mm256_loadu_pd(b + p * n + j + 4);
          __m256d av = _mm256_broadcast_sd(a0 + p);
          r00 = _mm256_fmadd_pd(av, b0, r00);
          r01 = _mm256_fmadd_pd(av, b1, r01);
          av = _mm256_broadcast_sd(a1 + p);
          r10 = _mm256_fmadd_pd(av, b0, r10);
          r11 = _mm256_fmadd_pd(av, b1, r11);
          av = _mm256_broadcast_sd(a2 + p);
          r20 = _mm256_fmadd_pd(av, b0, r20);
          r21 = _mm256_fmadd_pd(av, b1, r21);
          av = _mm256_broadcast_sd(a3 + p);
          r30 = _mm256_fmadd_pd(av, b0, r30);
          r31 = _mm256_fmadd_pd(av, b1, r31);
        }
        _mm256_storeu_pd(c0 + j, r00);
        _mm256_storeu_pd(c0 + j + 4, r01);
        _mm256_storeu_pd(c1 + j, r10);
        _mm256_storeu_pd(c1 + j + 4, r11);
        _mm256_storeu_pd(c2 + j, r20);
        _mm256_storeu_pd(c2 + j + 4, r21);
        _mm256_storeu_pd(c3 + j, r30);
        _mm256_storeu_pd(c3 + j + 4, r31);
      }
      for (; j < j1; ++j) {
        double s0 = c0[j], s1 = c1[j], s2 = c2[j], s3 = c3[j];
        for (std::size_t p = 0; p < k; ++p) {
          const double bv = b[p * n + j];
          s0 += a0[p] * bv;
          s1 += a1[p] * bv;
          s2 += a2[p] * bv;
          s3 += a3[p] * bv;
        }
        c0[j] = s0;
        c1[j] = s1;
        c2[j] = s2;
        c3[j] = s3;
      }
    }
    for (; i < m; ++i) {
      double* ci = c + i * n;
      for (std::size_t p = 0; p < k; ++p) axpy(a[i * k + p], b + p * n + j0, ci + j0, j1 - j0);
    }
  }
}

// Four rows of A against one row of B per pass, so each B row is streamed
// once per row block instead of once per output element.
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const double* a0 = a + (i + 0) * k;
    const double* a1 = a + (i + 1) * k;
    const double* a2 = a + (i + 2) * k;
    const double* a3 = a + (i + 3) * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
      __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
      std::size_t p = 0;
      for (; p + 4 <= k; p += 4) {
        const __m256d bv = _mm256_loadu_pd(bj + p);
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a0 + p), bv, s0);
        s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a1 + p), bv, s1);
        s2 = _mm256_fmadd_pd(_mm256_loadu_pd(a2 + p), bv, s2);
        s3 = _mm256_fmadd_pd(_mm256_loadu_pd(a3 + p), bv, s3);
      }
      double t0 = hsum(s0), t1 = hsum(s1), t2 = hsum(s2), t3 = hsum(s3);
      for (; p < k; ++p) {
        t0 += a0[p] * bj[p];
        t1 += a1[p] * bj[p];
        t2 += a2[p] * bj[p];
        t3 += a3[p] * bj[p];
      }
      c[(i + 0) * n + j] += t0;
      c[(i + 1) * n + j] += t1;
      c[(i + 2) * n + j] += t2;
      c[(i + 3) * n + j] += t3;
    }
  }
  for (; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] += dot(a + i * k, b + j * k, k);
}

// Transposes A once and reuses the register-blocked gemm_nn.
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  std::vector<double> at(m * k);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t i = 0; i < m; ++i) at[i * k + p] = a[p * m + i];
  gemm_nn(m, n, k, at.data(), b, c);
}

}  // namespace

const KernelTable* table() {
  static const KernelTable t{Isa::avx2, dot, axpy, gemm_nn, gemm_nt, gemm_tn};
  return &t;
}

}  // namespace enrol::simd::avx2

#else

namespace enrol::simd::avx2 {
const KernelTable* table() { return nullptr; }
}  // namespace enrol::simd::avx2

#endif
