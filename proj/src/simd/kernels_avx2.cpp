// AVX2 + FMA kernel variants. Compiled with -mavx2 -mfma; only dispatched
// when the CPU reports support.

#include <immintrin.h>

namespace mdt::simd::avx2_k {

struct Policy {
  static constexpr int width = 8;
  using V = __m256;
  using VD = __m256d;
  static V load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, V v) { _mm256_storeu_ps(p, v); }
  static V set1(float v) { return _mm256_set1_ps(v); }
  static V zero() { return _mm256_setzero_ps(); }
  static V fmadd(V a, V b, V c) { return _mm256_fmadd_ps(a, b, c); }
  static V add(V a, V b) { return _mm256_add_ps(a, b); }
  static V sub(V a, V b) { return _mm256_sub_ps(a, b); }
  static V mul(V a, V b) { return _mm256_mul_ps(a, b); }
  static V div(V a, V b) { return _mm256_div_ps(a, b); }
  static V max(V a, V b) { return _mm256_max_ps(a, b); }
  static V min(V a, V b) { return _mm256_min_ps(a, b); }
  static V sqrt(V a) { return _mm256_sqrt_ps(a); }
  static V select_gt0(V y, V g) {
    const V mask = _mm256_cmp_ps(y, _mm256_setzero_ps(), _CMP_GT_OQ);
    return _mm256_and_ps(g, mask);
  }
  static VD dzero() { return _mm256_setzero_pd(); }
  static VD cvt_lo(V v) { return _mm256_cvtps_pd(_mm256_castps256_ps128(v)); }
  static VD cvt_hi(V v) { return _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)); }
  static VD dadd(VD a, VD b) { return _mm256_add_pd(a, b); }
  static VD dsub(VD a, VD b) { return _mm256_sub_pd(a, b); }
  static VD dfma(VD a, VD b, VD c) { return _mm256_fmadd_pd(a, b, c); }
  static double dhsum(VD a) {
    const __m128d lo = _mm256_castpd256_pd128(a);
    const __m128d hi = _mm256_extractf128_pd(a, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
  }
};

}  // namespace mdt::simd::avx2_k

#define MDT_KERNEL_NS avx2_k
#define MDT_GEMM_MR 6
#define MDT_GEMM_NV 2
#include "kernel_impl.inl"
