// AVX2/FMA variants of the hot loops. Compiled with -mavx2 -mfma for this
// translation unit only; callers must route through the runtime dispatch in
// kernels.cpp, which verifies CPU support before selecting these.

#if defined(__x86_64__)

#include <immintrin.h>

#include <cstddef>

#include "mrcd/kernels.hpp"

namespace mrcd::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
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
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sumsq(const double* a, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d v0 = _mm256_loadu_pd(a + i);
    __m256d v1 = _mm256_loadu_pd(a + i + 4);
    acc0 = _mm256_fmadd_pd(v0, v0, acc0);
    acc1 = _mm256_fmadd_pd(v1, v1, acc1);
  }
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(a + i);
    acc0 = _mm256_fmadd_pd(v, v, acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * a[i];
  return s;
}

void axpy(double* y, double alpha, const double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void xpay(double* p, double beta, const double* r, std::size_t n) {
  const __m256d vb = _mm256_set1_pd(beta);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vp = _mm256_loadu_pd(p + i);
    vp = _mm256_fmadd_pd(vb, vp, _mm256_loadu_pd(r + i));
    _mm256_storeu_pd(p + i, vp);
  }
  for (; i < n; ++i) p[i] = r[i] + beta * p[i];
}

void fmadd_pointwise(double* out, double c, const double* x, const double* y, std::size_t n) {
  const __m256d vc = _mm256_set1_pd(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    __m256d vo = _mm256_fmadd_pd(vc, prod, _mm256_loadu_pd(out + i));
    _mm256_storeu_pd(out + i, vo);
  }
  for (; i < n; ++i) out[i] += c * x[i] * y[i];
}

// Tap decomposition: each kernel tap contributes a circularly shifted source
// row scaled by the tap weight. A column shift splits the row into two
// contiguous chunks, so the whole tap reduces to two axpy calls.
void conv2d_circular(const double* src, double* dst, std::size_t rows, std::size_t cols,
                     const double* k, std::size_t ksize) {
  const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(ksize) / 2;
  const std::ptrdiff_t nr = static_cast<std::ptrdiff_t>(rows);
  const std::ptrdiff_t nc = static_cast<std::ptrdiff_t>(cols);
  for (std::ptrdiff_t i = 0; i < nr; ++i) {
    double* out_row = dst + i * nc;
    for (std::ptrdiff_t j = 0; j < nc; ++j) out_row[j] = 0.0;
    for (std::ptrdiff_t a = -h; a <= h; ++a) {
      std::ptrdiff_t si = i - a;
      if (si < 0) si += nr;
      if (si >= nr) si -= nr;
      const double* src_row = src + si * nc;
      for (std::ptrdiff_t b = -h; b <= h; ++b) {
        const double c = k[(a + h) * static_cast<std::ptrdiff_t>(ksize) + (b + h)];
        std::ptrdiff_t s = b % nc;
        if (s < 0) s += nc;
        // out_row[j] += c * src_row[(j - s + nc) % nc]
        axpy(out_row + s, c, src_row, static_cast<std::size_t>(nc - s));
        axpy(out_row, c, src_row + (nc - s), static_cast<std::size_t>(s));
      }
    }
  }
}

}  // namespace mrcd::kernels::avx2

#endif  // __x86_64__
