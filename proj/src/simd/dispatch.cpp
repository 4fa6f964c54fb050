#include <atomic>
#include <string>

#include "tdcrflow/common/error.hpp"
#include "tdcrflow/simd/kernels.hpp"

namespace tdcr::simd {
namespace {

const KernelTable* initial_table() {
  if (const KernelTable* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& kernels() { return *active().load(std::memory_order_relaxed); }

bool isa_supported(Isa isa) {
  return isa == Isa::scalar || avx2_kernels() != nullptr;
}

void set_active_isa(Isa isa) {
  if (!isa_supported(isa))
    throw ContractViolation("instruction set not supported on this host: " + std::string(isa_name(isa)));
  active().store(isa == Isa::scalar ? &scalar_kernels() : avx2_kernels());
}

std::string_view isa_name(Isa isa) { return isa == Isa::scalar ? "scalar" : "avx2"; }

}  // namespace tdcr::simd
