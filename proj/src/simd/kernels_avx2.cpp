#include "tdcrflow/simd/kernels.hpp"

#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
#define TDCR_HAVE_AVX2_KERNELS 1
#include <immintrin.h>
#include <vector>
#endif

namespace tdcr::simd {

#if defined(TDCR_HAVE_AVX2_KERNELS)

#define TDCR_AVX2 __attribute__((target("avx2,fma")))

namespace {

// Reduction dimension is processed in chunks so the streamed operand stays
// cache resident. Chunking does not change the per-element summation order.
constexpr std::size_t kChunk = 256;

TDCR_AVX2 inline double fma_sd(double a, double b, double c) {
  return _mm_cvtsd_f64(_mm_fmadd_sd(_mm_set_sd(a), _mm_set_sd(b), _mm_set_sd(c)));
}

// Updates R rows of C starting at c (row stride n) with
//   C[r, j] += sum_p A(r, p) * B[p, j],   p in [0, k)
// where A(r, p) lives at a[r * a_rs + p * a_ps]. Every output element is a
// plain FMA chain over p, so its value does not depend on which row block or
// column block it falls in.
template <int R>
TDCR_AVX2 void rows_update(std::size_t n, std::size_t k, const double* a,
                           std::size_t a_rs, std::size_t a_ps, const double* b,
                           double* c) {
  const std::size_t n8 = n - n % 8;
  const std::size_t n4 = n - n % 4;
  std::size_t j = 0;
  for (; j < n8; j += 8) {
    __m256d lo[R], hi[R];
    for (int r = 0; r < R; ++r) {
      lo[r] = _mm256_loadu_pd(c + r * n + j);
      hi[r] = _mm256_loadu_pd(c + r * n + j + 4);
    }
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d b0 = _mm256_loadu_pd(b + p * n + j);
      const __m256d b1 = _mm256_loadu_pd(b + p * n + j + 4);
      for (int r = 0; r < R; ++r) {
        const __m256d x = _mm256_broadcast_sd(a + r * a_rs + p * a_ps);
        lo[r] = _mm256_fmadd_pd(x, b0, lo[r]);
        hi[r] = _mm256_fmadd_pd(x, b1, hi[r]);
      }
    }
    for (int r = 0; r < R; ++r) {
      _mm256_storeu_pd(c + r * n + j, lo[r]);
      _mm256_storeu_pd(c + r * n + j + 4, hi[r]);
    }
  }
  for (; j < n4; j += 4) {
    __m256d acc[R];
    for (int r = 0; r < R; ++r) acc[r] = _mm256_loadu_pd(c + r * n + j);
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d b0 = _mm256_loadu_pd(b + p * n + j);
      for (int r = 0; r < R; ++r)
        acc[r] = _mm256_fmadd_pd(_mm256_broadcast_sd(a + r * a_rs + p * a_ps), b0, acc[r]);
    }
    for (int r = 0; r < R; ++r) _mm256_storeu_pd(c + r * n + j, acc[r]);
  }
  for (; j < n; ++j) {
    for (int r = 0; r < R; ++r) {
      double acc = c[r * n + j];
      for (std::size_t p = 0; p < k; ++p) acc = fma_sd(a[r * a_rs + p * a_ps], b[p * n + j], acc);
      c[r * n + j] = acc;
    }
  }
}

TDCR_AVX2 void strided_gemm(std::size_t m, std::size_t n, std::size_t k,
                            const double* a, std::size_t a_rs, std::size_t a_ps,
                            const double* b, double* c, bool accumulate) {
  if (!accumulate)
    for (std::size_t i = 0; i < m * n; ++i) c[i] = 0.0;
  for (std::size_t p0 = 0; p0 < k; p0 += kChunk) {
    const std::size_t kc = (k - p0 < kChunk) ? k - p0 : kChunk;
    const double* ap = a + p0 * a_ps;
    const double* bp = b + p0 * n;
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) rows_update<4>(n, kc, ap + i * a_rs, a_rs, a_ps, bp, c + i * n);
    for (; i < m; ++i) rows_update<1>(n, kc, ap + i * a_rs, a_rs, a_ps, bp, c + i * n);
  }
}

TDCR_AVX2 void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a,
                       const double* b, double* c, bool accumulate) {
  strided_gemm(m, n, k, a, k, 1, b, c, accumulate);
}

TDCR_AVX2 void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a,
                       const double* b, double* c, bool accumulate) {
  strided_gemm(m, n, k, a, 1, m, b, c, accumulate);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c, bool accumulate) {
  std::vector<double> bt(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  gemm_nn(m, n, k, a, bt.data(), c, accumulate);
}

TDCR_AVX2 void axpy(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] = fma_sd(alpha, x[i], y[i]);
}

// Mul/add without fusion so results match the scalar reference bit for bit.
TDCR_AVX2 void sq_dist_row(const double q[3], const double* xs, const double* ys,
                           const double* zs, std::size_t n, double* out) {
  const __m256d qx = _mm256_set1_pd(q[0]);
  const __m256d qy = _mm256_set1_pd(q[1]);
  const __m256d qz = _mm256_set1_pd(q[2]);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d dx = _mm256_sub_pd(qx, _mm256_loadu_pd(xs + j));
    const __m256d dy = _mm256_sub_pd(qy, _mm256_loadu_pd(ys + j));
    const __m256d dz = _mm256_sub_pd(qz, _mm256_loadu_pd(zs + j));
    const __m256d s = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)),
                                    _mm256_mul_pd(dz, dz));
    _mm256_storeu_pd(out + j, s);
  }
  for (; j < n; ++j) {
    const __m128d dx = _mm_sub_sd(_mm_set_sd(q[0]), _mm_set_sd(xs[j]));
    const __m128d dy = _mm_sub_sd(_mm_set_sd(q[1]), _mm_set_sd(ys[j]));
    const __m128d dz = _mm_sub_sd(_mm_set_sd(q[2]), _mm_set_sd(zs[j]));
    out[j] = _mm_cvtsd_f64(
        _mm_add_sd(_mm_add_sd(_mm_mul_sd(dx, dx), _mm_mul_sd(dy, dy)), _mm_mul_sd(dz, dz)));
  }
}

TDCR_AVX2 void dist_row(const double q[3], const double* xs, const double* ys,
                        const double* zs, std::size_t n, double* out) {
  sq_dist_row(q, xs, ys, zs, n, out);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) _mm256_storeu_pd(out + j, _mm256_sqrt_pd(_mm256_loadu_pd(out + j)));
  for (; j < n; ++j) out[j] = _mm_cvtsd_f64(_mm_sqrt_sd(_mm_setzero_pd(), _mm_set_sd(out[j])));
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const KernelTable table{Isa::avx2, gemm_nn, gemm_tn, gemm_nt,
                                 axpy,      sq_dist_row, dist_row};
  __builtin_cpu_init();
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &table : nullptr;
}

#else

const KernelTable* avx2_kernels() { return nullptr; }

#endif

}  // namespace tdcr::simd
