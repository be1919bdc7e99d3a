#pragma once

// The multi-domain transfer generator: one shared encoder/decoder plus one
// trainable transfer module per (target domain, feature scale). Translation
// routes encoder features through a domain's modules and decodes a residual
// that is added onto the source image; reconstruction skips the transfer.

#include <map>
#include <string>
#include <vector>

#include "mdt/core/archive.hpp"
#include "mdt/core/errors.hpp"
#include "mdt/core/ops.hpp"
#include "mdt/core/rng.hpp"
#include "mdt/core/tensor.hpp"
#include "mdt/nn/layers.hpp"

namespace mdt::model {

struct ModelConfig {
  i64 base_channels = 32;
  i64 scales = 3;          // encoder levels: full, 1/2, 1/4 resolution
  i64 transfer_depth = 3;  // dense-connected convs per transfer module
  i64 transfer_growth = 16;
  i64 n_domains = 1;
  bool residual_output = true;
  std::string transfer_variant = "dense";  // dense | single_conv
};

inline void validate_model_config(const ModelConfig& c) {
  if (c.base_channels < 1) throw ConfigError("base_channels must be >= 1");
  if (c.scales != 2 && c.scales != 3) throw ConfigError("scales must be 2 or 3");
  if (c.transfer_depth < 1) throw ConfigError("transfer_depth must be >= 1");
  if (c.transfer_growth < 1) throw ConfigError("transfer_growth must be >= 1");
  if (c.n_domains < 1) throw ConfigError("n_domains must be >= 1");
  if (c.transfer_variant != "dense" && c.transfer_variant != "single_conv")
    throw ConfigError("unknown transfer_variant: " + c.transfer_variant);
}

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"base_channels", c.base_channels},
       {"scales", c.scales},
       {"transfer_depth", c.transfer_depth},
       {"transfer_growth", c.transfer_growth},
       {"n_domains", c.n_domains},
       {"residual_output", c.residual_output},
       {"transfer_variant", c.transfer_variant}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.base_channels = j.value("base_channels", c.base_channels);
  c.scales = j.value("scales", c.scales);
  c.transfer_depth = j.value("transfer_depth", c.transfer_depth);
  c.transfer_growth = j.value("transfer_growth", c.transfer_growth);
  c.n_domains = j.value("n_domains", c.n_domains);
  c.residual_output = j.value("residual_output", c.residual_output);
  c.transfer_variant = j.value("transfer_variant", c.transfer_variant);
}

inline std::uint64_t model_config_hash(const ModelConfig& c) {
  nlohmann::json j;
  to_json(j, c);
  const std::string s = j.dump();
  return fnv1a64(s.data(), s.size());
}

struct ParameterCount {
  i64 shared = 0;
  i64 per_domain = 0;
  i64 total = 0;
};

template <class T>
class Generator {
 public:
  Generator(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
    validate_model_config(cfg);
    const i64 s = cfg.scales;
    ch_.resize(static_cast<size_t>(s));
    for (i64 i = 0; i < s; ++i) ch_[static_cast<size_t>(i)] = cfg.base_channels << i;

    enc_conv_.emplace_back(1, ch_[0], 7, 1, 3);
    enc_in_.emplace_back(ch_[0]);
    for (i64 i = 1; i < s; ++i) {
      enc_conv_.emplace_back(ch_[static_cast<size_t>(i - 1)], ch_[static_cast<size_t>(i)], 3, 2, 1);
      enc_in_.emplace_back(ch_[static_cast<size_t>(i)]);
    }

    for (i64 i = s - 1; i >= 1; --i) {
      dec_conv_.emplace_back(ch_[static_cast<size_t>(i)], ch_[static_cast<size_t>(i - 1)], 3, 1, 1);
      dec_in_.emplace_back(ch_[static_cast<size_t>(i - 1)]);
    }
    head_ = nn::Conv2d<T>(ch_[0], 1, 7, 1, 3);

    transfer_.resize(static_cast<size_t>(cfg.n_domains));
    for (i64 d = 0; d < cfg.n_domains; ++d) {
      auto& per_scale = transfer_[static_cast<size_t>(d)];
      per_scale.resize(static_cast<size_t>(s));
      for (i64 sc = 0; sc < s; ++sc) {
        TransferModule& m = per_scale[static_cast<size_t>(sc)];
        const i64 c = ch_[static_cast<size_t>(sc)];
        if (cfg.transfer_variant == "dense") {
          for (i64 l = 0; l < cfg.transfer_depth; ++l) {
            m.convs.emplace_back(c + l * cfg.transfer_growth, cfg.transfer_growth, 3, 1, 1);
            m.norms.emplace_back(cfg.transfer_growth);
          }
          m.proj = nn::Conv2d<T>(c + cfg.transfer_depth * cfg.transfer_growth, c, 1, 1, 0);
        } else {
          m.convs.emplace_back(c, c, 3, 1, 1);
          m.norms.emplace_back(c);
        }
      }
    }

    init_params(init_seed);
  }

  const ModelConfig& config() const { return cfg_; }
  const std::vector<i64>& channel_plan() const { return ch_; }

  // ---- forward/backward contexts ----
  struct EncodeCtx {
    std::vector<typename nn::Conv2d<T>::Ctx> conv;
    std::vector<typename nn::InstanceNorm<T>::Ctx> in;
    std::vector<typename nn::Relu<T>::Ctx> relu;
  };

  struct TransferScaleCtx {
    std::vector<typename nn::Conv2d<T>::Ctx> conv;
    std::vector<typename nn::InstanceNorm<T>::Ctx> in;
    std::vector<typename nn::Relu<T>::Ctx> relu;
    typename nn::Conv2d<T>::Ctx proj;
  };
  struct TransferCtx {
    std::vector<TransferScaleCtx> scale;
  };

  struct DecodeCtx {
    std::vector<typename nn::Conv2d<T>::Ctx> conv;
    std::vector<typename nn::InstanceNorm<T>::Ctx> in;
    std::vector<typename nn::Relu<T>::Ctx> relu;
    typename nn::Conv2d<T>::Ctx head;
    Tensor<T> preclamp;
  };

  std::vector<Tensor<T>> encode(const Tensor<T>& img, EncodeCtx* ctx = nullptr) const {
    const i64 div = i64(1) << (cfg_.scales - 1);
    if (img.dim(2) % div != 0 || img.dim(3) % div != 0)
      throw std::invalid_argument("input spatial dims must be divisible by " +
                                  std::to_string(div) + ", got " + img.shape_str());
    if (ctx) {
      ctx->conv.assign(enc_conv_.size(), {});
      ctx->in.assign(enc_conv_.size(), {});
      ctx->relu.assign(enc_conv_.size(), {});
    }
    const nn::Relu<T> relu;
    std::vector<Tensor<T>> feats;
    Tensor<T> x = img;
    for (size_t i = 0; i < enc_conv_.size(); ++i) {
      x = enc_conv_[i].forward(x, ctx ? &ctx->conv[i] : nullptr);
      x = enc_in_[i].forward(x, ctx ? &ctx->in[i] : nullptr);
      x = relu.forward(x, ctx ? &ctx->relu[i] : nullptr);
      feats.push_back(x);
    }
    return feats;
  }

  // Gradient flows into encoder parameters; the input image is data.
  void encode_backward(std::vector<Tensor<T>> gfeats, const EncodeCtx& ctx) {
    const nn::Relu<T> relu;
    Tensor<T> g = std::move(gfeats.back());
    for (i64 i = static_cast<i64>(enc_conv_.size()) - 1; i >= 0; --i) {
      const size_t si = static_cast<size_t>(i);
      g = relu.backward(g, ctx.relu[si]);
      g = enc_in_[si].backward(g, ctx.in[si]);
      g = enc_conv_[si].backward(g, ctx.conv[si], i > 0);
      if (i > 0) ops::vadd<T>(g.numel(), g.data(), gfeats[si - 1].data(), g.data());
    }
  }

  std::vector<Tensor<T>> apply_transfer(const std::vector<Tensor<T>>& feats,
                                        i64 domain, TransferCtx* ctx = nullptr) const {
    check_domain(domain);
    if (static_cast<i64>(feats.size()) != cfg_.scales)
      throw std::invalid_argument("feature list length must equal scales");
    if (ctx) ctx->scale.assign(static_cast<size_t>(cfg_.scales), {});
    std::vector<Tensor<T>> out;
    for (i64 sc = 0; sc < cfg_.scales; ++sc)
      out.push_back(transfer_forward(feats[static_cast<size_t>(sc)], domain, sc,
                                     ctx ? &ctx->scale[static_cast<size_t>(sc)] : nullptr));
    return out;
  }

  std::vector<Tensor<T>> transfer_backward(const std::vector<Tensor<T>>& gout,
                                           i64 domain, const TransferCtx& ctx) {
    check_domain(domain);
    std::vector<Tensor<T>> gin;
    for (i64 sc = 0; sc < cfg_.scales; ++sc)
      gin.push_back(transfer_scale_backward(gout[static_cast<size_t>(sc)], domain, sc,
                                            ctx.scale[static_cast<size_t>(sc)]));
    return gin;
  }

  Tensor<T> decode(const std::vector<Tensor<T>>& feats, const Tensor<T>& source,
                   DecodeCtx* ctx = nullptr) const {
    if (static_cast<i64>(feats.size()) != cfg_.scales)
      throw std::invalid_argument("feature list length must equal scales");
    if (source.dim(2) != feats[0].dim(2) || source.dim(3) != feats[0].dim(3) ||
        source.dim(0) != feats[0].dim(0))
      throw std::invalid_argument("source shape " + source.shape_str() +
                                  " does not match scale-0 features " +
                                  feats[0].shape_str());
    if (ctx) {
      ctx->conv.assign(dec_conv_.size(), {});
      ctx->in.assign(dec_conv_.size(), {});
      ctx->relu.assign(dec_conv_.size(), {});
    }
    const nn::Relu<T> relu;
    const nn::Upsample2<T> up;
    Tensor<T> x = feats[static_cast<size_t>(cfg_.scales - 1)];
    for (size_t i = 0; i < dec_conv_.size(); ++i) {
      x = up.forward(x);
      x = dec_conv_[i].forward(x, ctx ? &ctx->conv[i] : nullptr);
      x = dec_in_[i].forward(x, ctx ? &ctx->in[i] : nullptr);
      x = relu.forward(x, ctx ? &ctx->relu[i] : nullptr);
      const Tensor<T>& skip = feats[static_cast<size_t>(cfg_.scales) - 2 - i];
      if (!x.same_shape(skip))
        throw std::invalid_argument("skip feature shape mismatch at scale " +
                                    std::to_string(cfg_.scales - 2 - static_cast<i64>(i)));
      ops::vadd<T>(x.numel(), x.data(), skip.data(), x.data());
    }
    Tensor<T> r = head_.forward(x, ctx ? &ctx->head : nullptr);

    Tensor<T> pre(r.shape());
    if (cfg_.residual_output)
      ops::vadd<T>(r.numel(), r.data(), source.data(), pre.data());
    else
      pre = r;
    Tensor<T> out(pre.shape());
    for (i64 i = 0; i < pre.numel(); ++i)
      out[i] = pre[i] < T(0) ? T(0) : (pre[i] > T(1) ? T(1) : pre[i]);
    if (ctx) ctx->preclamp = std::move(pre);
    return out;
  }

  // Returns gradients w.r.t. the (possibly transferred) per-scale features.
  std::vector<Tensor<T>> decode_backward(const Tensor<T>& gout, const DecodeCtx& ctx) {
    const nn::Relu<T> relu;
    const nn::Upsample2<T> up;
    Tensor<T> gr(gout.shape());
    for (i64 i = 0; i < gout.numel(); ++i) {
      const T v = ctx.preclamp[i];
      gr[i] = (v > T(0) && v < T(1)) ? gout[i] : T(0);
    }
    std::vector<Tensor<T>> gfeats(static_cast<size_t>(cfg_.scales));
    Tensor<T> g = head_.backward(gr, ctx.head, true);
    for (i64 i = static_cast<i64>(dec_conv_.size()) - 1; i >= 0; --i) {
      const size_t si = static_cast<size_t>(i);
      gfeats[static_cast<size_t>(cfg_.scales) - 2 - si] = g;  // skip branch
      g = relu.backward(g, ctx.relu[si]);
      g = dec_in_[si].backward(g, ctx.in[si]);
      g = dec_conv_[si].backward(g, ctx.conv[si], true);
      g = up.backward(g);
    }
    gfeats[static_cast<size_t>(cfg_.scales - 1)] = std::move(g);
    return gfeats;
  }

  Tensor<T> reconstruct(const Tensor<T>& img) const { return decode(encode(img), img); }

  Tensor<T> translate(const Tensor<T>& img, i64 domain) const {
    return decode(apply_transfer(encode(img), domain), img);
  }

  std::vector<nn::ParamRef<T>> parameters() {
    std::vector<nn::ParamRef<T>> out;
    for (size_t i = 0; i < enc_conv_.size(); ++i) {
      const std::string p = "enc.b" + std::to_string(i);
      enc_conv_[i].collect(p + ".conv", out);
      enc_in_[i].collect(p + ".in", out);
    }
    for (size_t i = 0; i < dec_conv_.size(); ++i) {
      const std::string p = "dec.b" + std::to_string(i);
      dec_conv_[i].collect(p + ".conv", out);
      dec_in_[i].collect(p + ".in", out);
    }
    head_.collect("dec.head", out);
    for (size_t d = 0; d < transfer_.size(); ++d)
      for (size_t sc = 0; sc < transfer_[d].size(); ++sc) {
        TransferModule& m = transfer_[d][sc];
        const std::string p = "tr.d" + std::to_string(d) + ".s" + std::to_string(sc);
        for (size_t l = 0; l < m.convs.size(); ++l) {
          m.convs[l].collect(p + ".l" + std::to_string(l) + ".conv", out);
          m.norms[l].collect(p + ".l" + std::to_string(l) + ".in", out);
        }
        if (cfg_.transfer_variant == "dense") m.proj.collect(p + ".proj", out);
      }
    return out;
  }

  void zero_grad() {
    for (auto& p : parameters()) p.grad->fill(T(0));
  }

  static ParameterCount parameter_count(const ModelConfig& cfg) {
    Generator tmp(cfg, 0);
    ParameterCount pc;
    for (auto& p : tmp.parameters()) {
      if (p.name.rfind("tr.d0.", 0) == 0)
        pc.per_domain += p.value->numel();
      else if (p.name.rfind("tr.", 0) != 0)
        pc.shared += p.value->numel();
    }
    pc.total = pc.shared + cfg.n_domains * pc.per_domain;
    return pc;
  }

 private:
  struct TransferModule {
    std::vector<nn::Conv2d<T>> convs;
    std::vector<nn::InstanceNorm<T>> norms;
    nn::Conv2d<T> proj;
  };

  void check_domain(i64 domain) const {
    if (domain < 0 || domain >= cfg_.n_domains)
      throw std::invalid_argument("unknown domain " + std::to_string(domain) +
                                  " (model has " + std::to_string(cfg_.n_domains) +
                                  " transfer modules)");
  }

  // Conv weights only; biases and norm affines keep their zero/one init.
  // Streams are keyed by parameter name, so adding a domain or scale leaves
  // every other module's init untouched.
  void init_params(std::uint64_t seed) {
    auto init_conv = [&](nn::Conv2d<T>& c, const std::string& name, double gain) {
      c.init_he(CounterRng(rng_fold(seed, fnv1a64(name.data(), name.size())), 0), gain);
    };
    for (size_t i = 0; i < enc_conv_.size(); ++i)
      init_conv(enc_conv_[i], "enc.b" + std::to_string(i) + ".conv", 1.0);
    for (size_t i = 0; i < dec_conv_.size(); ++i)
      init_conv(dec_conv_[i], "dec.b" + std::to_string(i) + ".conv", 1.0);
    // small-gain head keeps the residual branch near identity at init
    init_conv(head_, "dec.head", 0.1);
    for (size_t d = 0; d < transfer_.size(); ++d)
      for (size_t sc = 0; sc < transfer_[d].size(); ++sc) {
        TransferModule& m = transfer_[d][sc];
        const std::string p = "tr.d" + std::to_string(d) + ".s" + std::to_string(sc);
        for (size_t l = 0; l < m.convs.size(); ++l)
          init_conv(m.convs[l], p + ".l" + std::to_string(l) + ".conv", 1.0);
        if (cfg_.transfer_variant == "dense") init_conv(m.proj, p + ".proj", 1.0);
      }
  }

  Tensor<T> transfer_forward(const Tensor<T>& x, i64 domain, i64 sc,
                             TransferScaleCtx* ctx) const {
    const TransferModule& m = transfer_[static_cast<size_t>(domain)][static_cast<size_t>(sc)];
    const nn::Relu<T> relu;
    if (ctx) {
      ctx->conv.assign(m.convs.size(), {});
      ctx->in.assign(m.convs.size(), {});
      ctx->relu.assign(m.convs.size(), {});
    }
    if (cfg_.transfer_variant == "single_conv") {
      Tensor<T> y = m.convs[0].forward(x, ctx ? &ctx->conv[0] : nullptr);
      return m.norms[0].forward(y, ctx ? &ctx->in[0] : nullptr);
    }
    std::vector<Tensor<T>> parts{x};
    for (size_t l = 0; l < m.convs.size(); ++l) {
      std::vector<const Tensor<T>*> refs;
      for (const auto& p : parts) refs.push_back(&p);
      Tensor<T> cat = nn::concat_channels<T>(refs);
      Tensor<T> h = m.convs[l].forward(cat, ctx ? &ctx->conv[l] : nullptr);
      h = m.norms[l].forward(h, ctx ? &ctx->in[l] : nullptr);
      h = relu.forward(h, ctx ? &ctx->relu[l] : nullptr);
      parts.push_back(std::move(h));
    }
    std::vector<const Tensor<T>*> refs;
    for (const auto& p : parts) refs.push_back(&p);
    Tensor<T> cat = nn::concat_channels<T>(refs);
    return m.proj.forward(cat, ctx ? &ctx->proj : nullptr);
  }

  Tensor<T> transfer_scale_backward(const Tensor<T>& gy, i64 domain, i64 sc,
                                    const TransferScaleCtx& ctx) {
    TransferModule& m = transfer_[static_cast<size_t>(domain)][static_cast<size_t>(sc)];
    const nn::Relu<T> relu;
    if (cfg_.transfer_variant == "single_conv") {
      Tensor<T> g = m.norms[0].backward(gy, ctx.in[0]);
      return m.convs[0].backward(g, ctx.conv[0], true);
    }
    const i64 c = ch_[static_cast<size_t>(sc)];
    const i64 depth = static_cast<i64>(m.convs.size());
    std::vector<i64> sizes{c};
    for (i64 l = 0; l < depth; ++l) sizes.push_back(cfg_.transfer_growth);

    Tensor<T> gcat = m.proj.backward(gy, ctx.proj, true);
    std::vector<Tensor<T>> gparts = nn::split_channels<T>(gcat, sizes);
    for (i64 l = depth - 1; l >= 0; --l) {
      const size_t sl = static_cast<size_t>(l);
      Tensor<T> g = relu.backward(gparts[sl + 1], ctx.relu[sl]);
      g = m.norms[sl].backward(g, ctx.in[sl]);
      g = m.convs[sl].backward(g, ctx.conv[sl], true);
      std::vector<i64> in_sizes(sizes.begin(), sizes.begin() + l + 1);
      std::vector<Tensor<T>> gin = nn::split_channels<T>(g, in_sizes);
      for (i64 i = 0; i <= l; ++i)
        ops::vadd<T>(gin[static_cast<size_t>(i)].numel(),
                     gparts[static_cast<size_t>(i)].data(),
                     gin[static_cast<size_t>(i)].data(),
                     gparts[static_cast<size_t>(i)].data());
    }
    return std::move(gparts[0]);
  }

  ModelConfig cfg_;
  std::vector<i64> ch_;
  std::vector<nn::Conv2d<T>> enc_conv_;
  std::vector<nn::InstanceNorm<T>> enc_in_;
  std::vector<nn::Conv2d<T>> dec_conv_;  // deepest-to-shallowest up stages
  std::vector<nn::InstanceNorm<T>> dec_in_;
  nn::Conv2d<T> head_;
  std::vector<std::vector<TransferModule>> transfer_;  // [domain][scale]
};

}  // namespace mdt::model
