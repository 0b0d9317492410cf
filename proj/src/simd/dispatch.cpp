#include <atomic>

#include "mgb/simd/kernels.hpp"

namespace mgb::simd {

#if defined(MGB_HAVE_AVX2)
const KernelTable& avx2_kernel_table();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(MGB_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelTable* widest() {
  if (const KernelTable* avx2 = avx2_kernels()) return avx2;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{widest()};
  return table;
}

}  // namespace

const KernelTable* avx2_kernels() {
#if defined(MGB_HAVE_AVX2)
  static const bool supported = cpu_has_avx2();
  return supported ? &avx2_kernel_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active_kernels() { return *current().load(std::memory_order_acquire); }

bool select_backend(Backend backend) {
  const KernelTable* table = nullptr;
  switch (backend) {
    case Backend::kAuto: table = widest(); break;
    case Backend::kScalar: table = &scalar_kernels(); break;
    case Backend::kAvx2: table = avx2_kernels(); break;
  }
  if (table == nullptr) return false;
  current().store(table, std::memory_order_release);
  return true;
}

}  // namespace mgb::simd
