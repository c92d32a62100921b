#pragma once
// Dense double-precision inner loops used by the autodiff core.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2+FMA variant. The active table is chosen once at startup from CPUID and
// can be overridden with OOC_KERNELS=scalar|avx2 or kernels::select().
//
// Both variants accumulate each output element as a single chain over the
// reduction index, starting from zero, so an element's value depends only on
// the row/column it reads and never on where it sits in the output block.
// Row permutations of an input therefore permute outputs bit-exactly.

#include <cstddef>
#include <string_view>

namespace ooc::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

struct KernelTable {
    Isa isa;
    // C[m×n] = (accumulate ? C : 0) + A[m×k]·B[k×n]
    void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                    const double* b, double* c, bool accumulate);
    // C[m×n] = (accumulate ? C : 0) + A[m×k]·B[n×k]ᵀ
    void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                    const double* b, double* c, bool accumulate);
    // C[m×n] += A[k×m]ᵀ·B[k×n]
    void (*gemm_tn_acc)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                        const double* b, double* c);
    double (*dot)(std::size_t n, const double* x, const double* y);
    // y += alpha·x
    void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
};

const KernelTable& scalar_table();

// nullptr when the binary was built without AVX2 support or the CPU lacks it.
const KernelTable* avx2_table();

const KernelTable& active();

// Throws std::invalid_argument if the requested ISA is unavailable.
void select(Isa isa);

}  // namespace ooc::kernels
