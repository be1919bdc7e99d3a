#pragma once

// Type-generic wrappers over the compute kernels. The float path goes
// through the runtime-dispatched SIMD table; other scalar types (double is
// used by the finite-difference gradient checks) fall back to plain loops.

#include <cmath>
#include <cstring>

#include "mdt/core/tensor.hpp"
#include "mdt/simd/kernels.hpp"

namespace mdt::ops {

template <class T>
void gemm(bool transa, bool transb, i64 m, i64 n, i64 k, T alpha, const T* a,
          i64 lda, const T* b, i64 ldb, T beta, T* c, i64 ldc) {
  if (m <= 0 || n <= 0) return;
  auto el_a = [&](i64 r, i64 col) { return transa ? a[col * lda + r] : a[r * lda + col]; };
  for (i64 i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    if (beta == T(0))
      std::memset(crow, 0, sizeof(T) * static_cast<size_t>(n));
    else if (beta != T(1))
      for (i64 j = 0; j < n; ++j) crow[j] *= beta;
  }
  if (k <= 0 || alpha == T(0)) return;

  // four-row blocks amortize the B-row traffic
  i64 i = 0;
  for (; i + 4 <= m; i += 4) {
    T* c0 = c + i * ldc;
    T* c1 = c0 + ldc;
    T* c2 = c1 + ldc;
    T* c3 = c2 + ldc;
    for (i64 kk = 0; kk < k; ++kk) {
      const T a0 = alpha * el_a(i, kk), a1 = alpha * el_a(i + 1, kk);
      const T a2 = alpha * el_a(i + 2, kk), a3 = alpha * el_a(i + 3, kk);
      if (transb) {
        const T* bcol = b + kk;
        for (i64 j = 0; j < n; ++j) {
          const T bv = bcol[j * ldb];
          c0[j] += a0 * bv;
          c1[j] += a1 * bv;
          c2[j] += a2 * bv;
          c3[j] += a3 * bv;
        }
      } else {
        const T* brow = b + kk * ldb;
        for (i64 j = 0; j < n; ++j) {
          const T bv = brow[j];
          c0[j] += a0 * bv;
          c1[j] += a1 * bv;
          c2[j] += a2 * bv;
          c3[j] += a3 * bv;
        }
      }
    }
  }
  for (; i < m; ++i) {
    T* crow = c + i * ldc;
    for (i64 kk = 0; kk < k; ++kk) {
      const T av = alpha * el_a(i, kk);
      if (transb) {
        const T* bcol = b + kk;
        for (i64 j = 0; j < n; ++j) crow[j] += av * bcol[j * ldb];
      } else {
        const T* brow = b + kk * ldb;
        for (i64 j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

template <>
inline void gemm<float>(bool transa, bool transb, i64 m, i64 n, i64 k,
                        float alpha, const float* a, i64 lda, const float* b,
                        i64 ldb, float beta, float* c, i64 ldc) {
  simd::kernels().gemm(transa, transb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

template <class T>
void relu_fwd(i64 n, const T* x, T* y) {
  for (i64 i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}
template <>
inline void relu_fwd<float>(i64 n, const float* x, float* y) {
  simd::kernels().relu_fwd(n, x, y);
}

template <class T>
void relu_bwd(i64 n, const T* gy, const T* y, T* gx) {
  for (i64 i = 0; i < n; ++i) gx[i] = y[i] > T(0) ? gy[i] : T(0);
}
template <>
inline void relu_bwd<float>(i64 n, const float* gy, const float* y, float* gx) {
  simd::kernels().relu_bwd(n, gy, y, gx);
}

template <class T>
void vadd(i64 n, const T* a, const T* b, T* y) {
  for (i64 i = 0; i < n; ++i) y[i] = a[i] + b[i];
}
template <>
inline void vadd<float>(i64 n, const float* a, const float* b, float* y) {
  simd::kernels().vadd(n, a, b, y);
}

template <class T>
void vaxpy(i64 n, T alpha, const T* x, T* y) {
  for (i64 i = 0; i < n; ++i) y[i] += alpha * x[i];
}
template <>
inline void vaxpy<float>(i64 n, float alpha, const float* x, float* y) {
  simd::kernels().vaxpy(n, alpha, x, y);
}

template <class T>
void vscale(i64 n, T alpha, const T* x, T* y) {
  for (i64 i = 0; i < n; ++i) y[i] = alpha * x[i];
}
template <>
inline void vscale<float>(i64 n, float alpha, const float* x, float* y) {
  simd::kernels().vscale(n, alpha, x, y);
}

template <class T>
void add_clamp01(i64 n, const T* a, const T* b, T* y) {
  for (i64 i = 0; i < n; ++i) {
    const T s = a[i] + b[i];
    y[i] = s < T(0) ? T(0) : (s > T(1) ? T(1) : s);
  }
}
template <>
inline void add_clamp01<float>(i64 n, const float* a, const float* b, float* y) {
  simd::kernels().add_clamp01(n, a, b, y);
}

template <class T>
void scale_shift(i64 n, const T* x, T scale, T shift, T* y) {
  for (i64 i = 0; i < n; ++i) y[i] = x[i] * scale + shift;
}
template <>
inline void scale_shift<float>(i64 n, const float* x, float scale, float shift,
                               float* y) {
  simd::kernels().scale_shift(n, x, scale, shift, y);
}

template <class T>
double reduce_sum(i64 n, const T* x) {
  double s = 0.0;
  for (i64 i = 0; i < n; ++i) s += static_cast<double>(x[i]);
  return s;
}
template <>
inline double reduce_sum<float>(i64 n, const float* x) {
  return simd::kernels().reduce_sum(n, x);
}

template <class T>
double sqdiff_sum(i64 n, const T* a, const T* b) {
  double s = 0.0;
  for (i64 i = 0; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}
template <>
inline double sqdiff_sum<float>(i64 n, const float* a, const float* b) {
  return simd::kernels().sqdiff_sum(n, a, b);
}

template <class T>
double dot(i64 n, const T* a, const T* b) {
  double s = 0.0;
  for (i64 i = 0; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}
template <>
inline double dot<float>(i64 n, const float* a, const float* b) {
  return simd::kernels().dot(n, a, b);
}

template <class T>
void moments(i64 n, const T* x, T* mean, T* var) {
  if (n <= 0) {
    *mean = T(0);
    *var = T(0);
    return;
  }
  const double mu = reduce_sum(n, x) / static_cast<double>(n);
  const T fmu = static_cast<T>(mu);
  double ss = 0.0;
  for (i64 i = 0; i < n; ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(fmu);
    ss += d * d;
  }
  *mean = fmu;
  *var = static_cast<T>(ss / static_cast<double>(n));
}
template <>
inline void moments<float>(i64 n, const float* x, float* mean, float* var) {
  simd::kernels().moments(n, x, mean, var);
}

template <class T>
void adam_step(i64 n, T* p, const T* g, T* m, T* v, T lr, T beta1, T beta2,
               T eps, T bias1, T bias2) {
  for (i64 i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
    const T mhat = m[i] / bias1;
    const T vhat = v[i] / bias2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}
template <>
inline void adam_step<float>(i64 n, float* p, const float* g, float* m,
                             float* v, float lr, float beta1, float beta2,
                             float eps, float bias1, float bias2) {
  simd::kernels().adam_step(n, p, g, m, v, {lr, beta1, beta2, eps, bias1, bias2});
}

}  // namespace mdt::ops
