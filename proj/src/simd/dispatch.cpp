#include <stdexcept>
#include <string>

#include "hullinv/simd.hpp"
#include "kernels_impl.hpp"

namespace hullinv::simd {
namespace {

struct Active {
  Isa isa;
  const KernelTable* table;
};

Active& active() {
  static Active state = [] {
    const Isa isa = detect_isa();
    return Active{isa, isa == Isa::Avx2 ? avx2_kernels() : &scalar_kernels()};
  }();
  return state;
}

}  // namespace

const KernelTable* avx2_kernels() {
#if defined(HULLINV_HAVE_AVX2)
  return &avx2_table();
#else
  return nullptr;
#endif
}

bool cpu_has_avx2() {
#if defined(HULLINV_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Isa detect_isa() { return (avx2_kernels() != nullptr && cpu_has_avx2()) ? Isa::Avx2 : Isa::Scalar; }

const KernelTable& kernels() { return *active().table; }

Isa active_isa() { return active().isa; }

void set_isa(Isa isa) {
  if (isa == Isa::Avx2) {
    if (avx2_kernels() == nullptr || !cpu_has_avx2()) {
      throw std::invalid_argument("AVX2 kernels are not available on this build or CPU");
    }
    active() = Active{isa, avx2_kernels()};
  } else {
    active() = Active{isa, &scalar_kernels()};
  }
}

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::Scalar;
  if (name == "avx2") return Isa::Avx2;
  throw std::invalid_argument("unknown ISA '" + std::string(name) + "' (expected scalar|avx2)");
}

}  // namespace hullinv::simd
