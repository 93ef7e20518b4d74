#include <cstdlib>
#include <string_view>

#include "convkernel/simd/kernels.hpp"

namespace convkernel::simd {

bool avx2_available() noexcept {
#if defined(CONVKERNEL_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok;
#else
  return false;
#endif
}

const KernelTable& kernels_for(Isa isa) noexcept {
#if defined(CONVKERNEL_HAVE_AVX2)
  if (isa == Isa::avx2 && avx2_available()) return avx2_kernels();
#endif
  (void)isa;
  return scalar_kernels();
}

namespace {

Isa select_isa() noexcept {
  if (const char* env = std::getenv("CONVKERNEL_SIMD")) {
    if (std::string_view(env) == "scalar") return Isa::scalar;
  }
  return avx2_available() ? Isa::avx2 : Isa::scalar;
}

}  // namespace

Isa active_isa() noexcept {
  static const Isa isa = select_isa();
  return isa;
}

const KernelTable& active() noexcept {
  static const KernelTable& table = kernels_for(active_isa());
  return table;
}

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::avx2:
      return "avx2";
    case Isa::scalar:
      break;
  }
  return "scalar";
}

}  // namespace convkernel::simd
