#pragma once

#include <cstddef>
#include <string>

namespace mrcd::kernels {

// Scalar reference implementations. These define the semantics; the SIMD
// variants below must agree with them up to floating-point reassociation.
namespace scalar {

double dot(const double* a, const double* b, std::size_t n);
double sumsq(const double* a, std::size_t n);

/// y += alpha * x
void axpy(double* y, double alpha, const double* x, std::size_t n);

/// p = r + beta * p
void xpay(double* p, double beta, const double* r, std::size_t n);

/// out += c * (x .* y)
void fmadd_pointwise(double* out, double c, const double* x, const double* y, std::size_t n);

/// Per-band 2-D circular convolution: dst = src (*) k, grid rows x cols,
/// k is ksize x ksize with ksize odd. src and dst must not alias.
void conv2d_circular(const double* src, double* dst, std::size_t rows, std::size_t cols,
                     const double* k, std::size_t ksize);

}  // namespace scalar

#if defined(__x86_64__)
namespace avx2 {

double dot(const double* a, const double* b, std::size_t n);
double sumsq(const double* a, std::size_t n);
void axpy(double* y, double alpha, const double* x, std::size_t n);
void xpay(double* p, double beta, const double* r, std::size_t n);
void fmadd_pointwise(double* out, double c, const double* x, const double* y, std::size_t n);
void conv2d_circular(const double* src, double* dst, std::size_t rows, std::size_t cols,
                     const double* k, std::size_t ksize);

}  // namespace avx2
#endif

// Dispatched entry points. The active variant is selected once at startup
// from CPUID; MRCD_SIMD=scalar in the environment forces the reference path.
double dot(const double* a, const double* b, std::size_t n);
double sumsq(const double* a, std::size_t n);
void axpy(double* y, double alpha, const double* x, std::size_t n);
void xpay(double* p, double beta, const double* r, std::size_t n);
void fmadd_pointwise(double* out, double c, const double* x, const double* y, std::size_t n);
void conv2d_circular(const double* src, double* dst, std::size_t rows, std::size_t cols,
                     const double* k, std::size_t ksize);

/// Name of the active variant ("scalar" or "avx2").
const std::string& active_variant();

/// True when the AVX2 variants are compiled in and the CPU supports them.
bool avx2_available();

}  // namespace mrcd::kernels
