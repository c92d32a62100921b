// AVX2+FMA kernels. This translation unit is compiled with -mavx2 -mfma and
// is only entered after a CPUID check.
//
// Per-element arithmetic is a fused multiply-add chain over the reduction
// index starting from zero. Tail columns and rows use std::fma so that the
// result of an element never depends on whether it landed in a vector lane.

#include <immintrin.h>

#include <cmath>

#include "kernels_internal.hpp"

namespace ooc::kernels::detail {
namespace {

inline void store_block(double* dst, __m256d acc, bool accumulate) {
    if (accumulate) acc = _mm256_add_pd(_mm256_loadu_pd(dst), acc);
    _mm256_storeu_pd(dst, acc);
}

// Four rows of C, columns [j, j+8).
inline void nn_block_4x8(std::size_t n, std::size_t k, const double* a, const double* b,
                         double* c, std::size_t j, bool accumulate) {
    __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
    __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
    __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
    __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p) {
        const double* brow = b + p * n + j;
        const __m256d b0 = _mm256_loadu_pd(brow);
        const __m256d b1 = _mm256_loadu_pd(brow + 4);
        __m256d av = _mm256_broadcast_sd(a + p);
        c00 = _mm256_fmadd_pd(av, b0, c00);
        c01 = _mm256_fmadd_pd(av, b1, c01);
        av = _mm256_broadcast_sd(a + k + p);
        c10 = _mm256_fmadd_pd(av, b0, c10);
        c11 = _mm256_fmadd_pd(av, b1, c11);
        av = _mm256_broadcast_sd(a + 2 * k + p);
        c20 = _mm256_fmadd_pd(av, b0, c20);
        c21 = _mm256_fmadd_pd(av, b1, c21);
        av = _mm256_broadcast_sd(a + 3 * k + p);
        c30 = _mm256_fmadd_pd(av, b0, c30);
        c31 = _mm256_fmadd_pd(av, b1, c31);
    }
    store_block(c + j, c00, accumulate);
    store_block(c + j + 4, c01, accumulate);
    store_block(c + n + j, c10, accumulate);
    store_block(c + n + j + 4, c11, accumulate);
    store_block(c + 2 * n + j, c20, accumulate);
    store_block(c + 2 * n + j + 4, c21, accumulate);
    store_block(c + 3 * n + j, c30, accumulate);
    store_block(c + 3 * n + j + 4, c31, accumulate);
}

// One row of C, columns [j, j+4).
inline void nn_block_1x4(std::size_t n, std::size_t k, const double* a, const double* b,
                         double* c, std::size_t j, bool accumulate) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p) {
        acc = _mm256_fmadd_pd(_mm256_broadcast_sd(a + p), _mm256_loadu_pd(b + p * n + j), acc);
    }
    store_block(c + j, acc, accumulate);
}

inline void nn_scalar_column(std::size_t n, std::size_t k, const double* a, const double* b,
                             double* c, std::size_t j, bool accumulate) {
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc = std::fma(a[p], b[p * n + j], acc);
    c[j] = accumulate ? c[j] + acc : acc;
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
    std::size_t i = 0;
    const std::size_t n8 = n - n % 8;
    for (; i + 4 <= m; i += 4) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n8; j += 8) nn_block_4x8(n, k, arow, b, crow, j, accumulate);
        for (std::size_t r = 0; r < 4; ++r) {
            std::size_t j = n8;
            for (; j + 4 <= n; j += 4) nn_block_1x4(n, k, arow + r * k, b, crow + r * n, j, accumulate);
            for (; j < n; ++j) nn_scalar_column(n, k, arow + r * k, b, crow + r * n, j, accumulate);
        }
    }
    for (; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) nn_block_1x4(n, k, arow, b, crow, j, accumulate);
        for (; j < n; ++j) nn_scalar_column(n, k, arow, b, crow, j, accumulate);
    }
}

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(std::size_t n, const double* x, const double* y) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc = std::fma(x[i], y[i], acc);
    return acc;
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double v = dot(k, arow, b + j * k);
            c[i * n + j] = accumulate ? c[i * n + j] + v : v;
        }
    }
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
    const __m256d av = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

void gemm_tn_acc(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                 double* c) {
    for (std::size_t r = 0; r < k; ++r) {
        const double* brow = b + r * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = a[r * m + i];
            if (av != 0.0) axpy(n, av, brow, c + i * n);
        }
    }
}

}  // namespace

const KernelTable kAvx2Table{Isa::Avx2, gemm_nn, gemm_nt, gemm_tn_acc, dot, axpy};

}  // namespace ooc::kernels::detail
