#pragma once

#include "speckleflow/kernels.hpp"

namespace speckleflow::kernels {

#if defined(SPECKLEFLOW_BUILD_AVX2)
const KernelTable& avx2_kernels();
#endif
#if defined(SPECKLEFLOW_BUILD_NEON)
const KernelTable& neon_kernels();
#endif

}  // namespace speckleflow::kernels
