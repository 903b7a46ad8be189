#pragma once

// Data-parallel inner loops used by the tensor engine and the optimizer.
//
// Every kernel has a portable scalar reference and, where the build and the
// CPU allow it, an AVX2 variant. The active table is chosen once at first use
// from the CPU's feature bits and can be pinned with set_isa().
//
// Elementwise kernels (axpy, adam_update) avoid fused multiply-add so the
// vector variants round exactly like the scalar ones. Reductions (dot) use a
// fixed lane/accumulator order, so results are reproducible run to run but may
// differ from the scalar sum in the last bits.

#include <cstddef>
#include <string_view>

namespace hullinv::simd {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
  // y[i] += a * x[i]
  void (*axpy)(std::size_t n, double a, const double* x, double* y);
  // sum_i x[i] * y[i]
  double (*dot)(std::size_t n, const double* x, const double* y);
  // One Adam update over n elements; see trainer.hpp for the recurrence.
  void (*adam_update)(std::size_t n, double* w, double* m, double* v, const double* g,
                      double beta1, double beta2, double lr, double eps);
};

const KernelTable& scalar_kernels();
// Returns nullptr when the AVX2 variant was not compiled in.
const KernelTable* avx2_kernels();

bool cpu_has_avx2();
Isa detect_isa();

// The table used by the tensor engine. Thread-compatible, not thread-safe to
// change while kernels are running.
const KernelTable& kernels();
Isa active_isa();
// Throws std::invalid_argument if the requested ISA is unavailable.
void set_isa(Isa isa);

std::string_view isa_name(Isa isa);
Isa parse_isa(std::string_view name);

}  // namespace hullinv::simd
