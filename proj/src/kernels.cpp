#include "mrcd/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

namespace mrcd::kernels {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sumsq(const double* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * a[i];
  return s;
}

void axpy(double* y, double alpha, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void xpay(double* p, double beta, const double* r, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
}

void fmadd_pointwise(double* out, double c, const double* x, const double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] += c * x[i] * y[i];
}

void conv2d_circular(const double* src, double* dst, std::size_t rows, std::size_t cols,
                     const double* k, std::size_t ksize) {
  const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(ksize) / 2;
  const std::ptrdiff_t nr = static_cast<std::ptrdiff_t>(rows);
  const std::ptrdiff_t nc = static_cast<std::ptrdiff_t>(cols);
  for (std::ptrdiff_t i = 0; i < nr; ++i) {
    for (std::ptrdiff_t j = 0; j < nc; ++j) {
      double acc = 0.0;
      for (std::ptrdiff_t a = -h; a <= h; ++a) {
        std::ptrdiff_t si = i - a;
        if (si < 0) si += nr;
        if (si >= nr) si -= nr;
        for (std::ptrdiff_t b = -h; b <= h; ++b) {
          std::ptrdiff_t sj = j - b;
          if (sj < 0) sj += nc;
          if (sj >= nc) sj -= nc;
          acc += k[(a + h) * static_cast<std::ptrdiff_t>(ksize) + (b + h)] * src[si * nc + sj];
        }
      }
      dst[i * nc + j] = acc;
    }
  }
}

}  // namespace scalar

namespace {

struct Dispatch {
  double (*dot)(const double*, const double*, std::size_t);
  double (*sumsq)(const double*, std::size_t);
  void (*axpy)(double*, double, const double*, std::size_t);
  void (*xpay)(double*, double, const double*, std::size_t);
  void (*fmadd_pointwise)(double*, double, const double*, const double*, std::size_t);
  void (*conv2d_circular)(const double*, double*, std::size_t, std::size_t, const double*,
                          std::size_t);
  std::string name;
};

bool cpu_has_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Dispatch select_dispatch() {
  Dispatch d{scalar::dot,  scalar::sumsq,           scalar::axpy,
             scalar::xpay, scalar::fmadd_pointwise, scalar::conv2d_circular,
             "scalar"};
  const char* forced = std::getenv("MRCD_SIMD");
  if (forced != nullptr && std::string(forced) == "scalar") return d;
#if defined(__x86_64__)
  if (cpu_has_avx2()) {
    d = Dispatch{avx2::dot,  avx2::sumsq,           avx2::axpy,
                 avx2::xpay, avx2::fmadd_pointwise, avx2::conv2d_circular,
                 "avx2"};
  }
#endif
  return d;
}

const Dispatch& dispatch() {
  static const Dispatch d = select_dispatch();
  return d;
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) { return dispatch().dot(a, b, n); }
double sumsq(const double* a, std::size_t n) { return dispatch().sumsq(a, n); }
void axpy(double* y, double alpha, const double* x, std::size_t n) {
  dispatch().axpy(y, alpha, x, n);
}
void xpay(double* p, double beta, const double* r, std::size_t n) {
  dispatch().xpay(p, beta, r, n);
}
void fmadd_pointwise(double* out, double c, const double* x, const double* y, std::size_t n) {
  dispatch().fmadd_pointwise(out, c, x, y, n);
}
void conv2d_circular(const double* src, double* dst, std::size_t rows, std::size_t cols,
                     const double* k, std::size_t ksize) {
  if (ksize % 2 == 0) throw std::invalid_argument("conv2d_circular: kernel size must be odd");
  if (src == dst) throw std::invalid_argument("conv2d_circular: src and dst must not alias");
  dispatch().conv2d_circular(src, dst, rows, cols, k, ksize);
}

const std::string& active_variant() { return dispatch().name; }

bool avx2_available() {
#if defined(__x86_64__)
  return cpu_has_avx2();
#else
  return false;
#endif
}

}  // namespace mrcd::kernels
