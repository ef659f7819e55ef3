#include <cstdlib>
#include <string_view>
#include <vector>

#include "variants.hpp"

namespace speckleflow::kernels {
namespace {

std::vector<const KernelTable*> probe() {
  std::vector<const KernelTable*> tables{&scalar_kernels()};
#if defined(SPECKLEFLOW_BUILD_AVX2)
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    tables.push_back(&avx2_kernels());
  }
#endif
#if defined(SPECKLEFLOW_BUILD_NEON)
  tables.push_back(&neon_kernels());
#endif
  return tables;
}

const std::vector<const KernelTable*>& tables() {
  static const std::vector<const KernelTable*> t = probe();
  return t;
}

const KernelTable& choose() {
  const auto& t = tables();
  if (const char* forced = std::getenv("SPECKLEFLOW_SIMD")) {
    for (const KernelTable* k : t) {
      if (k->name == std::string_view(forced)) return *k;
    }
  }
  return *t.back();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& chosen = choose();
  return chosen;
}

std::span<const KernelTable* const> available() { return tables(); }

}  // namespace speckleflow::kernels
