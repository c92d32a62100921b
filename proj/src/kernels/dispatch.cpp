#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernels_internal.hpp"

namespace ooc::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(OOC_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* initial_table() {
    const KernelTable* best = avx2_table();
    if (const char* env = std::getenv("OOC_KERNELS")) {
        const std::string want(env);
        if (want == "scalar") return &scalar_table();
        if (want == "avx2" && best == nullptr) {
            throw std::invalid_argument("OOC_KERNELS=avx2 requested but AVX2 is unavailable");
        }
    }
    return best != nullptr ? best : &scalar_table();
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> table{initial_table()};
    return table;
}

}  // namespace

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
    }
    return "unknown";
}

const KernelTable& scalar_table() { return detail::kScalarTable; }

const KernelTable* avx2_table() {
#if defined(OOC_HAVE_AVX2)
    static const bool supported = cpu_has_avx2();
    return supported ? &detail::kAvx2Table : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

void select(Isa isa) {
    const KernelTable* table = isa == Isa::Scalar ? &scalar_table() : avx2_table();
    if (table == nullptr) {
        throw std::invalid_argument(std::string("kernel ISA unavailable: ") +
                                    std::string(isa_name(isa)));
    }
    current().store(table, std::memory_order_relaxed);
}

}  // namespace ooc::kernels
