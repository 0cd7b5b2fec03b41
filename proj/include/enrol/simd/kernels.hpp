// SPDX-License-Identifier: Apache-2.0
//
// Dense arithmetic inner loops used by the tensor primitives.
//
// Every kernel has a portable scalar reference in enrol::simd::scalar and,
// where the build targets x86-64, an AVX2+FMA variant in enrol::simd::avx2.
// The public entry points below forward to whichever table was selected at
// startup (CPU feature probe, overridable with ENROL_SIMD=scalar|avx2).
// All matrices are row-major and densely packed.
#pragma once

#include <cstddef>
#include <string_view>

#include "enrol/core/real.hpp"

namespace enrol::simd {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  Real (*dot)(const Real* a, const Real* b, std::size_t n);
  void (*axpy)(Real alpha, const Real* x, Real* y, std::size_t n);
  // C[m,n] += A[m,k] * B[k,n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b,
                  Real* c);
  // C[m,n] += A[m,k] * B[n,k]^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b,
                  Real* c);
  // C[m,n] += A[k,m]^T * B[k,n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b,
                  Real* c);
};

namespace scalar {
const KernelTable& table();
}

namespace avx2 {
/// Null when the variant was not compiled in.
const KernelTable* table();
}

bool cpu_supports(Isa isa);

/// Currently selected table.
const KernelTable& active();

/// Force a table; throws ConfigError when the CPU or build lacks it.
void select(Isa isa);

std::string_view isa_name(Isa isa);

inline Real dot(const Real* a, const Real* b, std::size_t n) { return active().dot(a, b, n); }
inline void axpy(Real alpha, const Real* x, Real* y, std::size_t n) {
  active().axpy(alpha, x, y, n);
}
inline void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b,
                    Real* c) {
  active().gemm_nn(m, n, k, a, b, c);
}
inline void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b,
                    Real* c) {
  active().gemm_nt(m, n, k, a, b, c);
}
inline void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b,
                    Real* c) {
  active().gemm_tn(m, n, k, a, b, c);
}

}  // namespace enrol::simd
