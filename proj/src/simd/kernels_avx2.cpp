// Compiled with -mavx2 only. Separate multiply and add keep rounding identical
// to the scalar reference.
#include <immintrin.h>

#include <cmath>

#include "hullinv/simd.hpp"
#include "kernels_impl.hpp"

namespace hullinv::simd {
namespace avx2 {

void axpy(std::size_t n, double a, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vx = _mm256_loadu_pd(x + i);
    const __m256d vy = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(y + i, _mm256_add_pd(vy, _mm256_mul_pd(va, vx)));
  }
  for (; i < n; ++i) {
    y[i] += a * x[i];
  }
}

double dot(std::size_t n, const double* x, const double* y) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  double lanes[4];
  _mm256_storeu_pd(lanes, acc);
  double tail = 0.0;
  for (; i < n; ++i) {
    tail += x[i] * y[i];
  }
  return ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + tail;
}

void adam_update(std::size_t n, double* w, double* m, double* v, const double* g, double beta1,
                 double beta2, double lr, double eps) {
  const __m256d vb1 = _mm256_set1_pd(beta1);
  const __m256d vb2 = _mm256_set1_pd(beta2);
  const __m256d vc1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d vc2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d veps = _mm256_set1_pd(eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vg = _mm256_loadu_pd(g + i);
    __m256d vm = _mm256_loadu_pd(m + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    vm = _mm256_add_pd(_mm256_mul_pd(vb1, vm), _mm256_mul_pd(vc1, vg));
    vv = _mm256_add_pd(_mm256_mul_pd(vb2, vv), _mm256_mul_pd(vc2, _mm256_mul_pd(vg, vg)));
    const __m256d step =
        _mm256_div_pd(_mm256_mul_pd(vlr, vm), _mm256_add_pd(_mm256_sqrt_pd(vv), veps));
    _mm256_storeu_pd(w + i, _mm256_sub_pd(_mm256_loadu_pd(w + i), step));
    _mm256_storeu_pd(m + i, vm);
    _mm256_storeu_pd(v + i, vv);
  }
  const double one_minus_b1 = 1.0 - beta1;
  const double one_minus_b2 = 1.0 - beta2;
  for (; i < n; ++i) {
    const double gi = g[i];
    m[i] = beta1 * m[i] + one_minus_b1 * gi;
    v[i] = beta2 * v[i] + one_minus_b2 * (gi * gi);
    w[i] = w[i] - (lr * m[i]) / (std::sqrt(v[i]) + eps);
  }
}

}  // namespace avx2

const KernelTable& avx2_table() {
  static const KernelTable table{&avx2::axpy, &avx2::dot, &avx2::adam_update};
  return table;
}

}  // namespace hullinv::simd
