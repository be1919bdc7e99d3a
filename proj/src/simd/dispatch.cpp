#include "mdt/simd/kernels.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>

namespace mdt::simd {

namespace scalar_k {
extern const KernelTable table;
}
namespace avx2_k {
extern const KernelTable table;
}
namespace avx512_k {
extern const KernelTable table;
}

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    case Isa::avx512:
      return __builtin_cpu_supports("avx512f") && __builtin_cpu_supports("avx512dq");
  }
  return false;
}

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::avx512:
      return "avx512";
  }
  return "?";
}

const KernelTable* kernels_for(Isa isa) {
  if (!cpu_supports(isa)) return nullptr;
  switch (isa) {
    case Isa::scalar:
      return &scalar_k::table;
    case Isa::avx2:
      return &avx2_k::table;
    case Isa::avx512:
      return &avx512_k::table;
  }
  return nullptr;
}

namespace {

Isa pick_isa() {
  if (const char* env = std::getenv("MDT_SIMD")) {
    for (Isa isa : {Isa::scalar, Isa::avx2, Isa::avx512}) {
      if (std::strcmp(env, isa_name(isa)) == 0) {
        if (cpu_supports(isa)) return isa;
        std::fprintf(stderr, "mdt: MDT_SIMD=%s not supported by this CPU, using default\n", env);
        break;
      }
    }
  }
  if (cpu_supports(Isa::avx512)) return Isa::avx512;
  if (cpu_supports(Isa::avx2)) return Isa::avx2;
  return Isa::scalar;
}

Isa g_active = Isa::scalar;
const KernelTable* g_table = nullptr;
std::once_flag g_once;

void init() {
  std::call_once(g_once, [] {
    g_active = pick_isa();
    g_table = kernels_for(g_active);
  });
}

}  // namespace

Isa active_isa() {
  init();
  return g_active;
}

const KernelTable& kernels() {
  init();
  return *g_table;
}

}  // namespace mdt::simd
