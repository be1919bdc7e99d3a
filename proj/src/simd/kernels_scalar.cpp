// Scalar reference kernels. Ground truth for the SIMD equivalence tests.

#include <cmath>

namespace mdt::simd::scalar_k {

struct Policy {
  static constexpr int width = 1;
  using V = float;
  using VD = double;
  static V load(const float* p) { return *p; }
  static void store(float* p, V v) { *p = v; }
  static V set1(float v) { return v; }
  static V zero() { return 0.0f; }
  static V fmadd(V a, V b, V c) { return a * b + c; }
  static V add(V a, V b) { return a + b; }
  static V sub(V a, V b) { return a - b; }
  static V mul(V a, V b) { return a * b; }
  static V div(V a, V b) { return a / b; }
  static V max(V a, V b) { return a > b ? a : b; }
  static V min(V a, V b) { return a < b ? a : b; }
  static V sqrt(V a) { return std::sqrt(a); }
  static V select_gt0(V y, V g) { return y > 0.0f ? g : 0.0f; }
  static VD dzero() { return 0.0; }
  static VD cvt_lo(V v) { return static_cast<double>(v); }
  static VD cvt_hi(V) { return 0.0; }
  static VD dadd(VD a, VD b) { return a + b; }
  static VD dsub(VD a, VD b) { return a - b; }
  static VD dfma(VD a, VD b, VD c) { return a * b + c; }
  static double dhsum(VD a) { return a; }
};

}  // namespace mdt::simd::scalar_k

#define MDT_KERNEL_NS scalar_k
#define MDT_GEMM_MR 4
#define MDT_GEMM_NV 8
#include "kernel_impl.inl"
