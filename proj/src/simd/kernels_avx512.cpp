// AVX-512 kernel variants (F + DQ). Compiled with the avx512 target flags;
// only dispatched when the CPU reports support.

#include <immintrin.h>

namespace mdt::simd::avx512_k {

struct Policy {
  static constexpr int width = 16;
  using V = __m512;
  using VD = __m512d;
  static V load(const float* p) { return _mm512_loadu_ps(p); }
  static void store(float* p, V v) { _mm512_storeu_ps(p, v); }
  static V set1(float v) { return _mm512_set1_ps(v); }
  static V zero() { return _mm512_setzero_ps(); }
  static V fmadd(V a, V b, V c) { return _mm512_fmadd_ps(a, b, c); }
  static V add(V a, V b) { return _mm512_add_ps(a, b); }
  static V sub(V a, V b) { return _mm512_sub_ps(a, b); }
  static V mul(V a, V b) { return _mm512_mul_ps(a, b); }
  static V div(V a, V b) { return _mm512_div_ps(a, b); }
  static V max(V a, V b) { return _mm512_max_ps(a, b); }
  static V min(V a, V b) { return _mm512_min_ps(a, b); }
  static V sqrt(V a) { return _mm512_sqrt_ps(a); }
  static V select_gt0(V y, V g) {
    const __mmask16 m = _mm512_cmp_ps_mask(y, _mm512_setzero_ps(), _CMP_GT_OQ);
    return _mm512_maskz_mov_ps(m, g);
  }
  static VD dzero() { return _mm512_setzero_pd(); }
  static VD cvt_lo(V v) { return _mm512_cvtps_pd(_mm512_castps512_ps256(v)); }
  static VD cvt_hi(V v) { return _mm512_cvtps_pd(_mm512_extractf32x8_ps(v, 1)); }
  static VD dadd(VD a, VD b) { return _mm512_add_pd(a, b); }
  static VD dsub(VD a, VD b) { return _mm512_sub_pd(a, b); }
  static VD dfma(VD a, VD b, VD c) { return _mm512_fmadd_pd(a, b, c); }
  static double dhsum(VD a) { return _mm512_reduce_add_pd(a); }
};

}  // namespace mdt::simd::avx512_k

#define MDT_KERNEL_NS avx512_k
#define MDT_GEMM_MR 8
#define MDT_GEMM_NV 3
#include "kernel_impl.inl"
