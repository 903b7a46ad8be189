#include <cmath>

#include "hullinv/simd.hpp"
#include "kernels_impl.hpp"

namespace hullinv::simd {
namespace scalar {

void axpy(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) {
    y[i] += a * x[i];
  }
}

// Four interleaved partial sums, reduced as (s0 + s1) + (s2 + s3). The AVX2
// variant keeps the same association per lane.
double dot(std::size_t n, const double* x, const double* y) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += x[i] * y[i];
    s1 += x[i + 1] * y[i + 1];
    s2 += x[i + 2] * y[i + 2];
    s3 += x[i + 3] * y[i + 3];
  }
  double tail = 0.0;
  for (; i < n; ++i) {
    tail += x[i] * y[i];
  }
  return ((s0 + s1) + (s2 + s3)) + tail;
}

void adam_update(std::size_t n, double* w, double* m, double* v, const double* g, double beta1,
                 double beta2, double lr, double eps) {
  const double one_minus_b1 = 1.0 - beta1;
  const double one_minus_b2 = 1.0 - beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = g[i];
    m[i] = beta1 * m[i] + one_minus_b1 * gi;
    v[i] = beta2 * v[i] + one_minus_b2 * (gi * gi);
    w[i] = w[i] - (lr * m[i]) / (std::sqrt(v[i]) + eps);
  }
}

}  // namespace scalar

const KernelTable& scalar_kernels() {
  static const KernelTable table{&scalar::axpy, &scalar::dot, &scalar::adam_update};
  return table;
}

}  // namespace hullinv::simd
