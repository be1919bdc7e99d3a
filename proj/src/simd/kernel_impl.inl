// Shared kernel bodies, included by the per-ISA translation units.
//
// The including TU must define:
//   MDT_KERNEL_NS  - namespace for this instantiation (scalar_k / avx2_k / avx512_k)
//   a struct named Policy with the vector type, width and primitive ops
//   MDT_GEMM_MR / MDT_GEMM_NV - microkernel rows / vectors per row
//
// All loops accumulate along K (or along the element index for reductions)
// in a fixed sequential order, so a given binary on a given machine is
// bit-reproducible. Reductions accumulate in double regardless of ISA.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "mdt/simd/kernels.hpp"

namespace mdt::simd {
namespace MDT_KERNEL_NS {

using V = Policy::V;
using VD = Policy::VD;
constexpr int W = Policy::width;

constexpr int MR = MDT_GEMM_MR;
constexpr int NV = MDT_GEMM_NV;
constexpr int NR = NV * W;

constexpr i64 KC = 256;
constexpr i64 MC = MR * 16;
constexpr i64 NC = NR * 64;

inline float at(bool trans, const float* a, i64 lda, i64 row, i64 col) {
  return trans ? a[col * lda + row] : a[row * lda + col];
}

// A block (mc x kc) packed as MR-row strips, K-major inside a strip.
inline void pack_a(bool trans, const float* a, i64 lda, i64 m0, i64 k0, i64 mc,
                   i64 kc, float* ap) {
  for (i64 i = 0; i < mc; i += MR) {
    const i64 rows = std::min<i64>(MR, mc - i);
    for (i64 k = 0; k < kc; ++k) {
      for (i64 r = 0; r < MR; ++r)
        ap[r] = r < rows ? at(trans, a, lda, m0 + i + r, k0 + k) : 0.0f;
      ap += MR;
    }
  }
}

// B block (kc x nc) packed as NR-column strips, K-major inside a strip.
inline void pack_b(bool trans, const float* b, i64 ldb, i64 k0, i64 n0, i64 kc,
                   i64 nc, float* bp) {
  for (i64 j = 0; j < nc; j += NR) {
    const i64 cols = std::min<i64>(NR, nc - j);
    for (i64 k = 0; k < kc; ++k) {
      for (i64 c = 0; c < NR; ++c)
        bp[c] = c < cols ? at(trans, b, ldb, k0 + k, n0 + j + c) : 0.0f;
      bp += NR;
    }
  }
}

// acc (MR x NR) = Ap strip * Bp strip over kc.
inline void micro_kernel(i64 kc, const float* ap, const float* bp, float* acc) {
  V c[MR][NV];
  for (int r = 0; r < MR; ++r)
    for (int v = 0; v < NV; ++v) c[r][v] = Policy::zero();
  for (i64 k = 0; k < kc; ++k) {
    V b[NV];
    for (int v = 0; v < NV; ++v) b[v] = Policy::load(bp + v * W);
    for (int r = 0; r < MR; ++r) {
      const V a = Policy::set1(ap[r]);
      for (int v = 0; v < NV; ++v) c[r][v] = Policy::fmadd(a, b[v], c[r][v]);
    }
    ap += MR;
    bp += NR;
  }
  for (int r = 0; r < MR; ++r)
    for (int v = 0; v < NV; ++v) Policy::store(acc + r * NR + v * W, c[r][v]);
}

inline void update_c(float* c, i64 ldc, const float* acc, i64 rows, i64 cols,
                     float alpha, float beta) {
  for (i64 r = 0; r < rows; ++r) {
    float* crow = c + r * ldc;
    const float* arow = acc + r * NR;
    if (beta == 0.0f) {
      for (i64 j = 0; j < cols; ++j) crow[j] = alpha * arow[j];
    } else if (beta == 1.0f) {
      for (i64 j = 0; j < cols; ++j) crow[j] += alpha * arow[j];
    } else {
      for (i64 j = 0; j < cols; ++j) crow[j] = alpha * arow[j] + beta * crow[j];
    }
  }
}

void gemm(bool transa, bool transb, i64 m, i64 n, i64 k, float alpha,
          const float* a, i64 lda, const float* b, i64 ldb, float beta,
          float* c, i64 ldc) {
  if (m <= 0 || n <= 0) return;
  if (k <= 0 || alpha == 0.0f) {
    for (i64 i = 0; i < m; ++i) {
      float* row = c + i * ldc;
      if (beta == 0.0f)
        std::memset(row, 0, sizeof(float) * static_cast<size_t>(n));
      else if (beta != 1.0f)
        for (i64 j = 0; j < n; ++j) row[j] *= beta;
    }
    return;
  }

  thread_local std::vector<float> apbuf, bpbuf;
  apbuf.resize(static_cast<size_t>(MC) * KC + MR);
  bpbuf.resize(static_cast<size_t>(NC) * KC + NR);
  alignas(64) float acc[MR * NR];

  for (i64 n0 = 0; n0 < n; n0 += NC) {
    const i64 nc = std::min(NC, n - n0);
    for (i64 k0 = 0; k0 < k; k0 += KC) {
      const i64 kc = std::min(KC, k - k0);
      const float beta_eff = k0 == 0 ? beta : 1.0f;
      pack_b(transb, b, ldb, k0, n0, kc, nc, bpbuf.data());
      for (i64 m0 = 0; m0 < m; m0 += MC) {
        const i64 mc = std::min(MC, m - m0);
        pack_a(transa, a, lda, m0, k0, mc, kc, apbuf.data());
        for (i64 j = 0; j < nc; j += NR) {
          const i64 cols = std::min<i64>(NR, nc - j);
          const float* bp = bpbuf.data() + j * kc;
          for (i64 i = 0; i < mc; i += MR) {
            const i64 rows = std::min<i64>(MR, mc - i);
            micro_kernel(kc, apbuf.data() + i * kc, bp, acc);
            update_c(c + (m0 + i) * ldc + n0 + j, ldc, acc, rows, cols, alpha,
                     beta_eff);
          }
        }
      }
    }
  }
}

void relu_fwd(i64 n, const float* x, float* y) {
  const V zero = Policy::zero();
  i64 i = 0;
  for (; i + W <= n; i += W) Policy::store(y + i, Policy::max(Policy::load(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd(i64 n, const float* gy, const float* y, float* gx) {
  i64 i = 0;
  for (; i + W <= n; i += W)
    Policy::store(gx + i, Policy::select_gt0(Policy::load(y + i), Policy::load(gy + i)));
  for (; i < n; ++i) gx[i] = y[i] > 0.0f ? gy[i] : 0.0f;
}

void vadd(i64 n, const float* a, const float* b, float* y) {
  i64 i = 0;
  for (; i + W <= n; i += W)
    Policy::store(y + i, Policy::add(Policy::load(a + i), Policy::load(b + i)));
  for (; i < n; ++i) y[i] = a[i] + b[i];
}

void vaxpy(i64 n, float alpha, const float* x, float* y) {
  const V va = Policy::set1(alpha);
  i64 i = 0;
  for (; i + W <= n; i += W)
    Policy::store(y + i, Policy::fmadd(va, Policy::load(x + i), Policy::load(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void vscale(i64 n, float alpha, const float* x, float* y) {
  const V va = Policy::set1(alpha);
  i64 i = 0;
  for (; i + W <= n; i += W) Policy::store(y + i, Policy::mul(va, Policy::load(x + i)));
  for (; i < n; ++i) y[i] = alpha * x[i];
}

void add_clamp01(i64 n, const float* a, const float* b, float* y) {
  const V zero = Policy::zero();
  const V one = Policy::set1(1.0f);
  i64 i = 0;
  for (; i + W <= n; i += W) {
    V s = Policy::add(Policy::load(a + i), Policy::load(b + i));
    Policy::store(y + i, Policy::min(Policy::max(s, zero), one));
  }
  for (; i < n; ++i) y[i] = std::min(std::max(a[i] + b[i], 0.0f), 1.0f);
}

void scale_shift(i64 n, const float* x, float scale, float shift, float* y) {
  const V vs = Policy::set1(scale);
  const V vb = Policy::set1(shift);
  i64 i = 0;
  for (; i + W <= n; i += W)
    Policy::store(y + i, Policy::fmadd(vs, Policy::load(x + i), vb));
  for (; i < n; ++i) y[i] = x[i] * scale + shift;
}

double reduce_sum(i64 n, const float* x) {
  VD acc = Policy::dzero();
  i64 i = 0;
  for (; i + W <= n; i += W) {
    const V v = Policy::load(x + i);
    acc = Policy::dadd(acc, Policy::dadd(Policy::cvt_lo(v), Policy::cvt_hi(v)));
  }
  double s = Policy::dhsum(acc);
  for (; i < n; ++i) s += static_cast<double>(x[i]);
  return s;
}

double sqdiff_sum(i64 n, const float* a, const float* b) {
  VD acc = Policy::dzero();
  i64 i = 0;
  for (; i + W <= n; i += W) {
    const V va = Policy::load(a + i);
    const V vb = Policy::load(b + i);
    const VD lo = Policy::dsub(Policy::cvt_lo(va), Policy::cvt_lo(vb));
    const VD hi = Policy::dsub(Policy::cvt_hi(va), Policy::cvt_hi(vb));
    acc = Policy::dfma(lo, lo, acc);
    acc = Policy::dfma(hi, hi, acc);
  }
  double s = Policy::dhsum(acc);
  for (; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

double dot(i64 n, const float* a, const float* b) {
  VD acc = Policy::dzero();
  i64 i = 0;
  for (; i + W <= n; i += W) {
    const V va = Policy::load(a + i);
    const V vb = Policy::load(b + i);
    acc = Policy::dfma(Policy::cvt_lo(va), Policy::cvt_lo(vb), acc);
    acc = Policy::dfma(Policy::cvt_hi(va), Policy::cvt_hi(vb), acc);
  }
  double s = Policy::dhsum(acc);
  for (; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

void moments(i64 n, const float* x, float* mean, float* var) {
  if (n <= 0) {
    *mean = 0.0f;
    *var = 0.0f;
    return;
  }
  const double mu = reduce_sum(n, x) / static_cast<double>(n);
  const V vmu = Policy::set1(static_cast<float>(mu));
  VD acc = Policy::dzero();
  i64 i = 0;
  for (; i + W <= n; i += W) {
    const V d = Policy::sub(Policy::load(x + i), vmu);
    const VD lo = Policy::cvt_lo(d);
    const VD hi = Policy::cvt_hi(d);
    acc = Policy::dfma(lo, lo, acc);
    acc = Policy::dfma(hi, hi, acc);
  }
  double ss = Policy::dhsum(acc);
  const float fmu = static_cast<float>(mu);
  for (; i < n; ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(fmu);
    ss += d * d;
  }
  *mean = fmu;
  *var = static_cast<float>(ss / static_cast<double>(n));
}

void adam_step(i64 n, float* p, const float* g, float* m, float* v,
               const AdamHyper& h) {
  const V vb1 = Policy::set1(h.beta1);
  const V vb1c = Policy::set1(1.0f - h.beta1);
  const V vb2 = Policy::set1(h.beta2);
  const V vb2c = Policy::set1(1.0f - h.beta2);
  const V veps = Policy::set1(h.eps);
  const V vlr = Policy::set1(-h.lr);
  const V vib1 = Policy::set1(1.0f / h.bias1);
  const V vib2 = Policy::set1(1.0f / h.bias2);
  i64 i = 0;
  for (; i + W <= n; i += W) {
    const V gi = Policy::load(g + i);
    V mi = Policy::fmadd(vb1c, gi, Policy::mul(vb1, Policy::load(m + i)));
    V vi = Policy::fmadd(vb2c, Policy::mul(gi, gi), Policy::mul(vb2, Policy::load(v + i)));
    Policy::store(m + i, mi);
    Policy::store(v + i, vi);
    const V mhat = Policy::mul(mi, vib1);
    const V denom = Policy::add(Policy::sqrt(Policy::mul(vi, vib2)), veps);
    const V upd = Policy::mul(vlr, Policy::div(mhat, denom));
    Policy::store(p + i, Policy::add(Policy::load(p + i), upd));
  }
  for (; i < n; ++i) {
    m[i] = h.beta1 * m[i] + (1.0f - h.beta1) * g[i];
    v[i] = h.beta2 * v[i] + (1.0f - h.beta2) * g[i] * g[i];
    const float mhat = m[i] / h.bias1;
    const float vhat = v[i] / h.bias2;
    p[i] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
  }
}

extern const KernelTable table;
const KernelTable table = {
    gemm,       relu_fwd, relu_bwd, vadd, vaxpy,     vscale, add_clamp01,
    scale_shift, reduce_sum, sqdiff_sum, dot,  moments, adam_step,
};

}  // namespace MDT_KERNEL_NS
}  // namespace mdt::simd
