#pragma once

// Float32 compute kernels with runtime ISA dispatch.
//
// Every kernel exists as a scalar reference implementation and, where the
// build machine supports it, as AVX2 and AVX-512 variants. The active
// variant is chosen once at startup (best supported ISA, overridable with
// MDT_SIMD=scalar|avx2|avx512) and stays fixed for the process lifetime, so
// results are reproducible run to run on the same machine. The per-ISA
// tables stay reachable for equivalence tests.

#include <cstdint>
#include <string>

namespace mdt::simd {

using i64 = std::int64_t;

enum class Isa { scalar, avx2, avx512 };

struct AdamHyper {
  float lr;
  float beta1;
  float beta2;
  float eps;
  float bias1;  // 1 - beta1^t
  float bias2;  // 1 - beta2^t
};

struct KernelTable {
  // C (MxN, row-major, leading dim ldc) = alpha*op(A)*op(B) + beta*C.
  // op(A) is MxK with leading dimension lda; transa/transb select op.
  void (*gemm)(bool transa, bool transb, i64 m, i64 n, i64 k, float alpha,
               const float* a, i64 lda, const float* b, i64 ldb, float beta,
               float* c, i64 ldc);
  void (*relu_fwd)(i64 n, const float* x, float* y);
  // gx = gy where y > 0 else 0 (y is the forward output)
  void (*relu_bwd)(i64 n, const float* gy, const float* y, float* gx);
  void (*vadd)(i64 n, const float* a, const float* b, float* y);
  void (*vaxpy)(i64 n, float alpha, const float* x, float* y);
  void (*vscale)(i64 n, float alpha, const float* x, float* y);
  // y = clamp(a + b, 0, 1)
  void (*add_clamp01)(i64 n, const float* a, const float* b, float* y);
  // y = x*scale + shift
  void (*scale_shift)(i64 n, const float* x, float scale, float shift, float* y);
  double (*reduce_sum)(i64 n, const float* x);
  double (*sqdiff_sum)(i64 n, const float* a, const float* b);
  double (*dot)(i64 n, const float* a, const float* b);
  // mean and (biased) variance in one call, two-pass
  void (*moments)(i64 n, const float* x, float* mean, float* var);
  void (*adam_step)(i64 n, float* p, const float* g, float* m, float* v,
                    const AdamHyper& h);
};

// Table for the ISA picked at startup.
const KernelTable& kernels();
Isa active_isa();

// Table for an explicit ISA, or nullptr when the CPU lacks it. Used by the
// equivalence tests.
const KernelTable* kernels_for(Isa isa);
bool cpu_supports(Isa isa);
const char* isa_name(Isa isa);

}  // namespace mdt::simd
