#include "tdcrflow/simd/kernels.hpp"

#include <cmath>

namespace tdcr::simd {
namespace {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c, bool accumulate) {
  if (!accumulate)
    for (std::size_t i = 0; i < m * n; ++i) c[i] = 0.0;
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
  }
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void sq_dist_row(const double q[3], const double* xs, const double* ys,
                 const double* zs, std::size_t n, double* out) {
  for (std::size_t j = 0; j < n; ++j) {
    const double dx = q[0] - xs[j];
    const double dy = q[1] - ys[j];
    const double dz = q[2] - zs[j];
    out[j] = dx * dx + dy * dy + dz * dz;
  }
}

void dist_row(const double q[3], const double* xs, const double* ys,
              const double* zs, std::size_t n, double* out) {
  sq_dist_row(q, xs, ys, zs, n, out);
  for (std::size_t j = 0; j < n; ++j) out[j] = std::sqrt(out[j]);
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::scalar, gemm_nn, gemm_tn, gemm_nt,
                                 axpy,        sq_dist_row, dist_row};
  return table;
}

}  // namespace tdcr::simd
