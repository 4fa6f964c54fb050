#pragma once

// Dense inner loops used by the autodiff graph and the metrics. Each kernel
// has a portable scalar reference and, on x86-64, an AVX2+FMA variant. The
// active table is picked once at startup from CPUID (override with the
// TDCR_SIMD environment variable: "scalar" or "avx2").
//
// All matrices are row-major and densely packed.

#include <cstddef>
#include <string_view>

namespace tdcr::simd {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;

  // C[m x n] (+)= A[m x k] * B[k x n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c, bool accumulate);
  // C[m x n] (+)= A[k x m]^T * B[k x n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c, bool accumulate);
  // C[m x n] (+)= A[m x k] * B[n x k]^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c, bool accumulate);
  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  // out[j] = |q - p_j|^2 over structure-of-arrays coordinates
  void (*sq_dist_row)(const double q[3], const double* xs, const double* ys,
                      const double* zs, std::size_t n, double* out);
  // out[j] = |q - p_j|
  void (*dist_row)(const double q[3], const double* xs, const double* ys,
                   const double* zs, std::size_t n, double* out);
};

const KernelTable& scalar_kernels();
// Null when the binary was built without x86 SIMD support or the CPU lacks it.
const KernelTable* avx2_kernels();

// Table in use by the library.
const KernelTable& kernels();
void set_active_isa(Isa isa);  // throws ContractViolation if unsupported
bool isa_supported(Isa isa);
std::string_view isa_name(Isa isa);

}  // namespace tdcr::simd
