#pragma once

#include "hullinv/simd.hpp"

namespace hullinv::simd {

#if defined(HULLINV_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

}  // namespace hullinv::simd
