#include <atomic>
#include <cstdlib>
#include <string_view>

#include "gradleak/simd/kernels.hpp"

namespace gradleak::simd {

#if defined(GRADLEAK_HAVE_AVX2)
const KernelTable& avx2_kernel_table();
#endif

namespace {

bool cpu_supports_avx2() {
#if defined(GRADLEAK_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* pick_default() {
  if (const char* env = std::getenv("GRADLEAK_SIMD"); env && std::string_view(env) == "scalar") {
    return &scalar_kernels();
  }
  if (const KernelTable* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{pick_default()};
  return table;
}

}  // namespace

const KernelTable* avx2_kernels() {
#if defined(GRADLEAK_HAVE_AVX2)
  static const bool supported = cpu_supports_avx2();
  return supported ? &avx2_kernel_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

bool select(std::string_view name) {
  const KernelTable* table = nullptr;
  if (name == "scalar") {
    table = &scalar_kernels();
  } else if (name == "avx2") {
    table = avx2_kernels();
  } else if (name == "auto") {
    table = pick_default();
  }
  if (!table) return false;
  current().store(table, std::memory_order_relaxed);
  return true;
}

}  // namespace gradleak::simd
