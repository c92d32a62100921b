#pragma once

#include "ooc/kernels.hpp"

namespace ooc::kernels::detail {

extern const KernelTable kScalarTable;

#if defined(OOC_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif

}  // namespace ooc::kernels::detail
