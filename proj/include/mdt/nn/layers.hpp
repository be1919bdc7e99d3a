#pragma once

// Minimal layer zoo with explicit forward/backward. Layers own their
// parameters and gradient buffers; per-call activations live in caller-held
// Ctx objects so one parameter set can serve several concurrent forward
// paths (reconstruction plus every transfer branch reuse the same decoder).

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "mdt/core/ops.hpp"
#include "mdt/core/rng.hpp"
#include "mdt/core/tensor.hpp"

namespace mdt::nn {

template <class T>
struct ParamRef {
  std::string name;
  Tensor<T>* value;
  Tensor<T>* grad;
};

namespace detail {

template <class T>
void im2col(const T* x, i64 c, i64 h, i64 w, i64 k, i64 stride, i64 pad,
            i64 out_h, i64 out_w, T* col) {
  for (i64 ch = 0; ch < c; ++ch)
    for (i64 ky = 0; ky < k; ++ky)
      for (i64 kx = 0; kx < k; ++kx) {
        T* dst = col + ((ch * k + ky) * k + kx) * out_h * out_w;
        for (i64 oy = 0; oy < out_h; ++oy) {
          const i64 iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) {
            std::memset(dst + oy * out_w, 0, sizeof(T) * static_cast<size_t>(out_w));
            continue;
          }
          const T* src = x + (ch * h + iy) * w;
          if (stride == 1) {
            const i64 ix0 = -pad + kx;
            i64 ox = 0;
            for (; ox < out_w && ix0 + ox < 0; ++ox) dst[oy * out_w + ox] = T(0);
            const i64 valid = std::min(out_w, w - ix0);
            if (valid > ox)
              std::memcpy(dst + oy * out_w + ox, src + ix0 + ox,
                          sizeof(T) * static_cast<size_t>(valid - ox));
            for (ox = std::max(ox, valid); ox < out_w; ++ox)
              dst[oy * out_w + ox] = T(0);
          } else {
            for (i64 ox = 0; ox < out_w; ++ox) {
              const i64 ix = ox * stride - pad + kx;
              dst[oy * out_w + ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
            }
          }
        }
      }
}

template <class T>
void col2im(const T* col, i64 c, i64 h, i64 w, i64 k, i64 stride, i64 pad,
            i64 out_h, i64 out_w, T* x) {
  for (i64 ch = 0; ch < c; ++ch)
    for (i64 ky = 0; ky < k; ++ky)
      for (i64 kx = 0; kx < k; ++kx) {
        const T* src = col + ((ch * k + ky) * k + kx) * out_h * out_w;
        for (i64 oy = 0; oy < out_h; ++oy) {
          const i64 iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          T* dst = x + (ch * h + iy) * w;
          for (i64 ox = 0; ox < out_w; ++ox) {
            const i64 ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) dst[ix] += src[oy * out_w + ox];
          }
        }
      }
}

}  // namespace detail

template <class T>
struct Conv2d {
  i64 in_ch = 0, out_ch = 0, k = 3, stride = 1, pad = 1;
  bool frozen = false;  // skip weight gradients (feature extractor)
  Tensor<T> w, b, gw, gb;

  Conv2d() = default;
  Conv2d(i64 in, i64 out, i64 kernel, i64 s, i64 p)
      : in_ch(in), out_ch(out), k(kernel), stride(s), pad(p),
        w({out, in, kernel, kernel}), b({out}),
        gw({out, in, kernel, kernel}), gb({out}) {}

  // He-style normal init scaled by `gain`, from a dedicated counter stream.
  void init_he(CounterRng rng, double gain = 1.0) {
    const double std = gain * std::sqrt(2.0 / static_cast<double>(in_ch * k * k));
    for (i64 i = 0; i < w.numel(); ++i)
      w[i] = static_cast<T>(rng.next_gaussian() * std);
    b.fill(T(0));
  }

  struct Ctx {
    Tensor<T> input;
  };

  i64 out_dim(i64 in) const { return (in + 2 * pad - k) / stride + 1; }

  Tensor<T> forward(const Tensor<T>& x, Ctx* ctx) const {
    const i64 n = x.dim(0), h = x.dim(2), width = x.dim(3);
    const i64 oh = out_dim(h), ow = out_dim(width);
    const i64 ckk = in_ch * k * k, ohw = oh * ow;
    Tensor<T> y({n, out_ch, oh, ow});
    std::vector<T> col(static_cast<size_t>(ckk * ohw));
    for (i64 i = 0; i < n; ++i) {
      detail::im2col(x.data() + i * in_ch * h * width, in_ch, h, width, k,
                     stride, pad, oh, ow, col.data());
      T* yrow = y.data() + i * out_ch * ohw;
      ops::gemm<T>(false, false, out_ch, ohw, ckk, T(1), w.data(), ckk,
                   col.data(), ohw, T(0), yrow, ohw);
      for (i64 m = 0; m < out_ch; ++m)
        ops::scale_shift<T>(ohw, yrow + m * ohw, T(1), b[m], yrow + m * ohw);
    }
    if (ctx) ctx->input = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, const Ctx& ctx, bool want_gx = true) {
    const Tensor<T>& x = ctx.input;
    const i64 n = x.dim(0), h = x.dim(2), width = x.dim(3);
    const i64 oh = gy.dim(2), ow = gy.dim(3);
    const i64 ckk = in_ch * k * k, ohw = oh * ow;
    Tensor<T> gx;
    if (want_gx) gx = Tensor<T>({n, in_ch, h, width});
    std::vector<T> col(static_cast<size_t>(ckk * ohw));
    std::vector<T> gcol(want_gx ? static_cast<size_t>(ckk * ohw) : 0);
    for (i64 i = 0; i < n; ++i) {
      const T* gyrow = gy.data() + i * out_ch * ohw;
      if (!frozen) {
        detail::im2col(x.data() + i * in_ch * h * width, in_ch, h, width, k,
                       stride, pad, oh, ow, col.data());
        ops::gemm<T>(false, true, out_ch, ckk, ohw, T(1), gyrow, ohw,
                     col.data(), ohw, T(1), gw.data(), ckk);
        for (i64 m = 0; m < out_ch; ++m)
          gb[m] += static_cast<T>(ops::reduce_sum<T>(ohw, gyrow + m * ohw));
      }
      if (want_gx) {
        ops::gemm<T>(true, false, ckk, ohw, out_ch, T(1), w.data(), ckk, gyrow,
                     ohw, T(0), gcol.data(), ohw);
        detail::col2im(gcol.data(), in_ch, h, width, k, stride, pad, oh, ow,
                       gx.data() + i * in_ch * h * width);
      }
    }
    return gx;
  }

  void zero_grad() {
    gw.fill(T(0));
    gb.fill(T(0));
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    out.push_back({prefix + ".w", &w, &gw});
    out.push_back({prefix + ".b", &b, &gb});
  }
};

template <class T>
struct InstanceNorm {
  i64 ch = 0;
  T eps = static_cast<T>(1e-5);
  Tensor<T> gamma, beta, ggamma, gbeta;

  InstanceNorm() = default;
  explicit InstanceNorm(i64 channels)
      : ch(channels), gamma({channels}), beta({channels}), ggamma({channels}),
        gbeta({channels}) {
    gamma.fill(T(1));
  }

  struct Ctx {
    Tensor<T> xhat;
    std::vector<T> inv_std;  // per (n, c)
  };

  Tensor<T> forward(const Tensor<T>& x, Ctx* ctx) const {
    const i64 n = x.dim(0), h = x.dim(2), w = x.dim(3), m = h * w;
    Tensor<T> y(x.shape());
    Tensor<T> xhat(x.shape());
    std::vector<T> inv_std(static_cast<size_t>(n * ch));
    for (i64 i = 0; i < n; ++i)
      for (i64 c = 0; c < ch; ++c) {
        const T* px = x.data() + (i * ch + c) * m;
        T* ph = xhat.data() + (i * ch + c) * m;
        T mean, var;
        ops::moments<T>(m, px, &mean, &var);
        const T is = T(1) / std::sqrt(var + eps);
        inv_std[static_cast<size_t>(i * ch + c)] = is;
        ops::scale_shift<T>(m, px, is, -mean * is, ph);
        ops::scale_shift<T>(m, ph, gamma[c], beta[c], y.data() + (i * ch + c) * m);
      }
    if (ctx) {
      ctx->xhat = std::move(xhat);
      ctx->inv_std = std::move(inv_std);
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, const Ctx& ctx) {
    const i64 n = gy.dim(0), h = gy.dim(2), w = gy.dim(3), m = h * w;
    Tensor<T> gx(gy.shape());
    for (i64 i = 0; i < n; ++i)
      for (i64 c = 0; c < ch; ++c) {
        const i64 off = (i * ch + c) * m;
        const T* pg = gy.data() + off;
        const T* ph = ctx.xhat.data() + off;
        T* po = gx.data() + off;
        const double sum1 = ops::reduce_sum<T>(m, pg);
        const double sum2 = ops::dot<T>(m, pg, ph);
        gbeta[c] += static_cast<T>(sum1);
        ggamma[c] += static_cast<T>(sum2);
        const T a = gamma[c] * ctx.inv_std[static_cast<size_t>(i * ch + c)];
        const T b1 = static_cast<T>(sum1 / static_cast<double>(m));
        const T b2 = static_cast<T>(sum2 / static_cast<double>(m));
        ops::scale_shift<T>(m, pg, a, -a * b1, po);
        ops::vaxpy<T>(m, -a * b2, ph, po);
      }
    return gx;
  }

  void zero_grad() {
    ggamma.fill(T(0));
    gbeta.fill(T(0));
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    out.push_back({prefix + ".gamma", &gamma, &ggamma});
    out.push_back({prefix + ".beta", &beta, &gbeta});
  }
};

template <class T>
struct Relu {
  struct Ctx {
    Tensor<T> out;
  };
  Tensor<T> forward(const Tensor<T>& x, Ctx* ctx) const {
    Tensor<T> y(x.shape());
    ops::relu_fwd<T>(x.numel(), x.data(), y.data());
    if (ctx) ctx->out = y;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy, const Ctx& ctx) const {
    Tensor<T> gx(gy.shape());
    ops::relu_bwd<T>(gy.numel(), gy.data(), ctx.out.data(), gx.data());
    return gx;
  }
};

// 2x2 stride-2 max pooling (odd trailing row/column dropped).
template <class T>
struct MaxPool2 {
  struct Ctx {
    Tensor<std::uint8_t> argmax;  // 0..3, position within the window
    i64 in_h = 0, in_w = 0;
  };
  Tensor<T> forward(const Tensor<T>& x, Ctx* ctx) const {
    const i64 n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const i64 oh = h / 2, ow = w / 2;
    Tensor<T> y({n, c, oh, ow});
    Tensor<std::uint8_t> arg({n, c, oh, ow});
    for (i64 p = 0; p < n * c; ++p) {
      const T* src = x.data() + p * h * w;
      T* dst = y.data() + p * oh * ow;
      std::uint8_t* am = arg.data() + p * oh * ow;
      for (i64 oy = 0; oy < oh; ++oy)
        for (i64 ox = 0; ox < ow; ++ox) {
          const i64 base = 2 * oy * w + 2 * ox;
          T best = src[base];
          std::uint8_t bi = 0;
          const T cand1 = src[base + 1];
          if (cand1 > best) best = cand1, bi = 1;
          const T cand2 = src[base + w];
          if (cand2 > best) best = cand2, bi = 2;
          const T cand3 = src[base + w + 1];
          if (cand3 > best) best = cand3, bi = 3;
          dst[oy * ow + ox] = best;
          am[oy * ow + ox] = bi;
        }
    }
    if (ctx) {
      ctx->argmax = std::move(arg);
      ctx->in_h = h;
      ctx->in_w = w;
    }
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy, const Ctx& ctx) const {
    const i64 n = gy.dim(0), c = gy.dim(1), oh = gy.dim(2), ow = gy.dim(3);
    Tensor<T> gx({n, c, ctx.in_h, ctx.in_w});
    for (i64 p = 0; p < n * c; ++p) {
      const T* src = gy.data() + p * oh * ow;
      const std::uint8_t* am = ctx.argmax.data() + p * oh * ow;
      T* dst = gx.data() + p * ctx.in_h * ctx.in_w;
      for (i64 oy = 0; oy < oh; ++oy)
        for (i64 ox = 0; ox < ow; ++ox) {
          const std::uint8_t a = am[oy * ow + ox];
          const i64 iy = 2 * oy + (a >> 1), ix = 2 * ox + (a & 1);
          dst[iy * ctx.in_w + ix] += src[oy * ow + ox];
        }
    }
    return gx;
  }
};

// Nearest-neighbour 2x upsampling.
template <class T>
struct Upsample2 {
  Tensor<T> forward(const Tensor<T>& x) const {
    const i64 n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor<T> y({n, c, 2 * h, 2 * w});
    for (i64 p = 0; p < n * c; ++p) {
      const T* src = x.data() + p * h * w;
      T* dst = y.data() + p * 4 * h * w;
      for (i64 yy = 0; yy < h; ++yy)
        for (i64 xx = 0; xx < w; ++xx) {
          const T v = src[yy * w + xx];
          T* d = dst + 2 * yy * 2 * w + 2 * xx;
          d[0] = v;
          d[1] = v;
          d[2 * w] = v;
          d[2 * w + 1] = v;
        }
    }
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) const {
    const i64 n = gy.dim(0), c = gy.dim(1), oh = gy.dim(2), ow = gy.dim(3);
    const i64 h = oh / 2, w = ow / 2;
    Tensor<T> gx({n, c, h, w});
    for (i64 p = 0; p < n * c; ++p) {
      const T* src = gy.data() + p * oh * ow;
      T* dst = gx.data() + p * h * w;
      for (i64 yy = 0; yy < h; ++yy)
        for (i64 xx = 0; xx < w; ++xx) {
          const T* s = src + 2 * yy * ow + 2 * xx;
          dst[yy * w + xx] = s[0] + s[1] + s[ow] + s[ow + 1];
        }
    }
    return gx;
  }
};

template <class T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& parts) {
  const i64 n = parts[0]->dim(0), h = parts[0]->dim(2), w = parts[0]->dim(3);
  i64 total_c = 0;
  for (const auto* p : parts) total_c += p->dim(1);
  Tensor<T> out({n, total_c, h, w});
  for (i64 i = 0; i < n; ++i) {
    i64 c0 = 0;
    for (const auto* p : parts) {
      const i64 pc = p->dim(1);
      std::memcpy(out.data() + (i * total_c + c0) * h * w,
                  p->data() + i * pc * h * w,
                  sizeof(T) * static_cast<size_t>(pc * h * w));
      c0 += pc;
    }
  }
  return out;
}

template <class T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, const std::vector<i64>& sizes) {
  const i64 n = x.dim(0), h = x.dim(2), w = x.dim(3);
  std::vector<Tensor<T>> out;
  i64 c0 = 0;
  for (i64 c : sizes) {
    Tensor<T> part({n, c, h, w});
    for (i64 i = 0; i < n; ++i)
      std::memcpy(part.data() + i * c * h * w,
                  x.data() + (i * x.dim(1) + c0) * h * w,
                  sizeof(T) * static_cast<size_t>(c * h * w));
    c0 += c;
    out.push_back(std::move(part));
  }
  return out;
}

}  // namespace mdt::nn
