#include <cstdlib>
#include <cstring>

#include "seqdiff/kernels/kernels.hpp"

namespace seqdiff::kernels {

bool avx2_available() {
#if defined(__x86_64__) || defined(_M_X64)
  static const bool ok = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return ok;
#else
  return false;
#endif
}

Isa active_isa() {
  static const Isa isa = [] {
    const char* env = std::getenv("SEQDIFF_ISA");
    if (env != nullptr && std::strcmp(env, "scalar") == 0) return Isa::scalar;
    return avx2_available() ? Isa::avx2 : Isa::scalar;
  }();
  return isa;
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

const KernelTable<float>& table_f32() {
  static const KernelTable<float>& t = active_isa() == Isa::avx2 ? avx2_f32() : scalar_f32();
  return t;
}

const KernelTable<double>& table_f64() {
  static const KernelTable<double>& t = active_isa() == Isa::avx2 ? avx2_f64() : scalar_f64();
  return t;
}

}  // namespace seqdiff::kernels
