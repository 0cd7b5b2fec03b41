// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cstdlib>
#include <string>

#include "enrol/core/error.hpp"
#include "enrol/simd/kernels.hpp"

namespace enrol::simd {
namespace {

const KernelTable* pick_default() {
  if (const char* env = std::getenv("ENROL_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return &scalar::table();
    if (want == "avx2" && cpu_supports(Isa::avx2)) return avx2::table();
  }
  if (cpu_supports(Isa::avx2)) return avx2::table();
  return &scalar::table();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{pick_default()};
  return current;
}

}  // namespace

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(__x86_64__) && defined(__GNUC__)
      if (avx2::table() == nullptr) return false;
      __builtin_cpu_init();
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& active() { return *slot().load(std::memory_order_relaxed); }

void select(Isa isa) {
  if (!cpu_supports(isa))
    throw ConfigError("SIMD variant '" + std::string(isa_name(isa)) + "' is not available");
  slot().store(isa == Isa::avx2 ? avx2::table() : &scalar::table());
}

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

}  // namespace enrol::simd
