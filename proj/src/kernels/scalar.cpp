// Reference kernels. Compiled with -ffp-contract=off so every multiply-add
// rounds twice; the AVX2 variants are checked against these with a tolerance.

#include "kernels_internal.hpp"

namespace ooc::kernels::detail {
namespace {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
        }
    }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
            c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
        }
    }
}

void gemm_tn_acc(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                 double* c) {
    for (std::size_t r = 0; r < k; ++r) {
        for (std::size_t i = 0; i < m; ++i) {
            const double av = a[r * m + i];
            for (std::size_t j = 0; j < n; ++j) c[i * n + j] += av * b[r * n + j];
        }
    }
}

double dot(std::size_t n, const double* x, const double* y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

const KernelTable kScalarTable{Isa::Scalar, gemm_nn, gemm_nt, gemm_tn_acc, dot, axpy};

}  // namespace ooc::kernels::detail
