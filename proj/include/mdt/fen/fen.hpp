#pragma once

// Frozen feature extraction network: a VGG-16/19 conv trunk exposing named
// relu activation sites. Weights come from a flat archive or from a seeded
// random init (tests run fully offline with the latter). The extractor
// never exposes trainable parameters; backward only propagates data
// gradients to the input image.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mdt/core/archive.hpp"
#include "mdt/core/errors.hpp"
#include "mdt/core/rng.hpp"
#include "mdt/core/tensor.hpp"
#include "mdt/nn/layers.hpp"

namespace mdt::fen {

struct FenConfig {
  std::string variant = "vgg16";               // vgg16 | vgg19
  std::string weights_source = "random-seeded";  // random-seeded | pretrained-file
  std::uint64_t seed = 0;
  std::string weights_path;
  std::vector<std::string> content_layers = {"relu4_1"};
  std::vector<std::string> domain_layers = {"relu1_2", "relu2_2", "relu3_2",
                                            "relu4_2"};
};

std::uint64_t fen_config_hash(const FenConfig& cfg);

struct ArchOp {
  enum Kind { conv, pool } kind = conv;
  std::string conv_name;  // convB_I; activation site is reluB_I
  std::string site;
  i64 in_ch = 0, out_ch = 0;
};

std::vector<ArchOp> vgg_arch(const std::string& variant);

template <class T>
struct FeatureMap {
  Tensor<T> values;  // N x C x H x W
  std::string layer;
};

// Per batch element: (F F^T) / (C*H*W) with F the C x (H*W) flattening.
template <class T>
Tensor<T> gram(const Tensor<T>& features);

template <class T>
Tensor<T> gram_backward(const Tensor<T>& features, const Tensor<T>& ggram);

template <class T>
class Fen {
 public:
  static Fen build(const FenConfig& cfg);

  const FenConfig& config() const { return cfg_; }
  bool has_layer(const std::string& name) const { return site_index_.count(name) != 0; }
  i64 layer_channels(const std::string& name) const;

  std::vector<FeatureMap<T>> extract(const Tensor<T>& images,
                                     const std::vector<std::string>& layers) const;

  // Training path: forward keeping contexts, then backward from per-site
  // gradients down to the (pre-normalization) input image.
  struct FwdCtx {
    i64 deepest = -1;
    Tensor<T> input;                      // original image batch
    Tensor<T> stem;                       // normalized 3-channel input
    std::map<std::string, Tensor<T>> taps;
    std::vector<typename nn::Conv2d<T>::Ctx> conv_ctx;
    std::vector<typename nn::Relu<T>::Ctx> relu_ctx;
    std::vector<typename nn::MaxPool2<T>::Ctx> pool_ctx;
  };

  void forward_ctx(const Tensor<T>& images, const std::vector<std::string>& layers,
                   FwdCtx& ctx) const;
  Tensor<T> backward_to_input(const FwdCtx& ctx,
                              const std::map<std::string, Tensor<T>>& site_grads) const;

  void export_weights(const std::string& path) const;

 private:
  void check_depth(const Tensor<T>& images, i64 deepest) const;
  Tensor<T> normalize_stem(const Tensor<T>& images) const;

  FenConfig cfg_;
  std::vector<ArchOp> arch_;
  std::map<std::string, size_t> site_index_;  // site name -> op index
  mutable std::vector<nn::Conv2d<T>> convs_;  // one per conv op, in arch order
  std::vector<size_t> conv_of_op_;            // op index -> convs_ index
};

// ---- implementation ----

inline std::vector<ArchOp> vgg_arch(const std::string& variant) {
  int per_block;
  if (variant == "vgg16")
    per_block = 3;
  else if (variant == "vgg19")
    per_block = 4;
  else
    throw ConfigError("unknown FEN variant: " + variant);

  const i64 widths[5] = {64, 128, 256, 512, 512};
  const int convs_in_block[5] = {2, 2, per_block, per_block, per_block};
  std::vector<ArchOp> ops;
  i64 in_ch = 3;
  for (int b = 0; b < 5; ++b) {
    for (int i = 0; i < convs_in_block[b]; ++i) {
      ArchOp op;
      op.kind = ArchOp::conv;
      op.conv_name = "conv" + std::to_string(b + 1) + "_" + std::to_string(i + 1);
      op.site = "relu" + std::to_string(b + 1) + "_" + std::to_string(i + 1);
      op.in_ch = in_ch;
      op.out_ch = widths[b];
      in_ch = widths[b];
      ops.push_back(std::move(op));
    }
    if (b < 4) ops.push_back(ArchOp{ArchOp::pool, "", "", 0, 0});
  }
  return ops;
}

inline std::uint64_t fen_config_hash(const FenConfig& cfg) {
  std::string s = cfg.variant + "|" + cfg.weights_source + "|" +
                  std::to_string(cfg.seed) + "|" + cfg.weights_path + "|";
  for (const auto& l : cfg.content_layers) s += l + ",";
  s += "|";
  for (const auto& l : cfg.domain_layers) s += l + ",";
  return fnv1a64(s.data(), s.size());
}

template <class T>
Fen<T> Fen<T>::build(const FenConfig& cfg) {
  if (cfg.content_layers.empty())
    throw ConfigError("FEN content_layers must be non-empty");
  if (cfg.domain_layers.empty())
    throw ConfigError("FEN domain_layers must be non-empty");
  if (cfg.weights_source != "random-seeded" && cfg.weights_source != "pretrained-file")
    throw ConfigError("unknown FEN weights_source: " + cfg.weights_source);

  Fen f;
  f.cfg_ = cfg;
  f.arch_ = vgg_arch(cfg.variant);
  for (size_t i = 0; i < f.arch_.size(); ++i) {
    const ArchOp& op = f.arch_[i];
    if (op.kind != ArchOp::conv) {
      f.conv_of_op_.push_back(static_cast<size_t>(-1));
      continue;
    }
    f.site_index_[op.site] = i;
    f.conv_of_op_.push_back(f.convs_.size());
    nn::Conv2d<T> conv(op.in_ch, op.out_ch, 3, 1, 1);
    conv.frozen = true;
    f.convs_.push_back(std::move(conv));
  }

  for (const auto& name : cfg.content_layers)
    if (!f.has_layer(name)) throw ConfigError("unknown FEN layer: " + name);
  for (const auto& name : cfg.domain_layers)
    if (!f.has_layer(name)) throw ConfigError("unknown FEN layer: " + name);

  if (cfg.weights_source == "random-seeded") {
    size_t ci = 0;
    for (const auto& op : f.arch_) {
      if (op.kind != ArchOp::conv) continue;
      f.convs_[ci].init_he(
          CounterRng(rng_fold(cfg.seed, fnv1a64(op.conv_name.data(), op.conv_name.size())), 0));
      ++ci;
    }
  } else {
    ArchiveReader ar(cfg.weights_path);
    const std::string kind = ar.meta().value("kind", "");
    const std::string variant = ar.meta().value("variant", "");
    if (kind != "fen-weights" || variant != cfg.variant)
      throw std::runtime_error("FEN manifest mismatch: archive holds '" + variant +
                               "' (" + kind + "), config wants " + cfg.variant);
    size_t ci = 0;
    for (const auto& op : f.arch_) {
      if (op.kind != ArchOp::conv) continue;
      nn::Conv2d<T>& conv = f.convs_[ci++];
      if (!ar.has(op.conv_name + ".w") || !ar.has(op.conv_name + ".b"))
        throw std::runtime_error("FEN manifest mismatch: missing " + op.conv_name);
      Tensor<float> w = ar.read<float>(op.conv_name + ".w");
      Tensor<float> b = ar.read<float>(op.conv_name + ".b");
      if (w.shape() != conv.w.shape() || b.shape() != conv.b.shape())
        throw std::runtime_error("FEN manifest mismatch: bad shape for " + op.conv_name +
                                 " " + w.shape_str());
      for (i64 i = 0; i < w.numel(); ++i) conv.w[i] = static_cast<T>(w[i]);
      for (i64 i = 0; i < b.numel(); ++i) conv.b[i] = static_cast<T>(b[i]);
    }
  }
  return f;
}

template <class T>
i64 Fen<T>::layer_channels(const std::string& name) const {
  auto it = site_index_.find(name);
  if (it == site_index_.end()) throw ConfigError("unknown FEN layer: " + name);
  return arch_[it->second].out_ch;
}

template <class T>
void Fen<T>::check_depth(const Tensor<T>& images, i64 deepest) const {
  i64 pools = 0;
  for (i64 i = 0; i < deepest; ++i)
    if (arch_[static_cast<size_t>(i)].kind == ArchOp::pool) ++pools;
  const i64 need = i64(1) << pools;
  if (images.dim(2) < 2 * need || images.dim(3) < 2 * need) {
    // find the deepest requested site name for the message
    std::string name;
    for (const auto& [site, idx] : site_index_)
      if (static_cast<i64>(idx) == deepest) name = site;
    if (name.empty()) name = "<unknown>";
    throw std::runtime_error("input too small for layer " + name + ": " +
                             images.shape_str());
  }
}

template <class T>
Tensor<T> Fen<T>::normalize_stem(const Tensor<T>& images) const {
  static const T mean[3] = {static_cast<T>(0.485), static_cast<T>(0.456),
                            static_cast<T>(0.406)};
  static const T std3[3] = {static_cast<T>(0.229), static_cast<T>(0.224),
                            static_cast<T>(0.225)};
  const i64 n = images.dim(0), c = images.dim(1), h = images.dim(2), w = images.dim(3);
  if (c != 1 && c != 3)
    throw std::invalid_argument("FEN input must have 1 or 3 channels");
  Tensor<T> out({n, 3, h, w});
  const i64 plane = h * w;
  for (i64 i = 0; i < n; ++i)
    for (i64 ch = 0; ch < 3; ++ch) {
      const T* src = images.data() + (i * c + (c == 3 ? ch : 0)) * plane;
      ops::scale_shift<T>(plane, src, T(1) / std3[ch], -mean[ch] / std3[ch],
                          out.data() + (i * 3 + ch) * plane);
    }
  return out;
}

template <class T>
void Fen<T>::forward_ctx(const Tensor<T>& images,
                         const std::vector<std::string>& layers, FwdCtx& ctx) const {
  i64 deepest = -1;
  for (const auto& name : layers) {
    auto it = site_index_.find(name);
    if (it == site_index_.end()) throw ConfigError("unknown FEN layer: " + name);
    deepest = std::max<i64>(deepest, static_cast<i64>(it->second));
  }
  if (deepest < 0) throw ConfigError("no FEN layers requested");
  check_depth(images, deepest);

  ctx.deepest = deepest;
  ctx.input = images;
  ctx.conv_ctx.assign(arch_.size(), {});
  ctx.relu_ctx.assign(arch_.size(), {});
  ctx.pool_ctx.assign(arch_.size(), {});
  ctx.taps.clear();

  Tensor<T> x = normalize_stem(images);
  ctx.stem = x;
  const nn::Relu<T> relu;
  const nn::MaxPool2<T> pool;
  for (i64 i = 0; i <= deepest; ++i) {
    const ArchOp& op = arch_[static_cast<size_t>(i)];
    if (op.kind == ArchOp::pool) {
      x = pool.forward(x, &ctx.pool_ctx[static_cast<size_t>(i)]);
      continue;
    }
    const nn::Conv2d<T>& conv = convs_[conv_of_op_[static_cast<size_t>(i)]];
    x = conv.forward(x, &ctx.conv_ctx[static_cast<size_t>(i)]);
    x = relu.forward(x, &ctx.relu_ctx[static_cast<size_t>(i)]);
    for (const auto& name : layers)
      if (site_index_.at(name) == static_cast<size_t>(i)) ctx.taps[name] = x;
  }
}

template <class T>
std::vector<FeatureMap<T>> Fen<T>::extract(const Tensor<T>& images,
                                           const std::vector<std::string>& layers) const {
  FwdCtx ctx;
  forward_ctx(images, layers, ctx);
  std::vector<FeatureMap<T>> out;
  out.reserve(layers.size());
  for (const auto& name : layers) out.push_back({ctx.taps.at(name), name});
  return out;
}

template <class T>
Tensor<T> Fen<T>::backward_to_input(const FwdCtx& ctx,
                                    const std::map<std::string, Tensor<T>>& site_grads) const {
  const nn::Relu<T> relu;
  const nn::MaxPool2<T> pool;
  Tensor<T> g;
  for (i64 i = ctx.deepest; i >= 0; --i) {
    const ArchOp& op = arch_[static_cast<size_t>(i)];
    if (op.kind == ArchOp::conv) {
      for (const auto& [name, tap_grad] : site_grads) {
        if (site_index_.at(name) != static_cast<size_t>(i)) continue;
        if (g.empty())
          g = tap_grad;
        else
          ops::vadd<T>(g.numel(), g.data(), tap_grad.data(), g.data());
      }
      if (g.empty()) continue;  // above every injected gradient so far
      g = relu.backward(g, ctx.relu_ctx[static_cast<size_t>(i)]);
      // frozen conv: data gradient only
      g = const_cast<nn::Conv2d<T>&>(convs_[conv_of_op_[static_cast<size_t>(i)]])
              .backward(g, ctx.conv_ctx[static_cast<size_t>(i)], true);
    } else if (!g.empty()) {
      g = pool.backward(g, ctx.pool_ctx[static_cast<size_t>(i)]);
    }
  }
  if (g.empty()) throw std::invalid_argument("no gradients injected");

  // stem: undo per-channel scaling, collapse replicated channels
  static const T std3[3] = {static_cast<T>(0.229), static_cast<T>(0.224),
                            static_cast<T>(0.225)};
  const i64 n = ctx.input.dim(0), c = ctx.input.dim(1);
  const i64 plane = ctx.input.dim(2) * ctx.input.dim(3);
  Tensor<T> gin(ctx.input.shape());
  for (i64 i = 0; i < n; ++i)
    for (i64 ch = 0; ch < 3; ++ch) {
      const T* src = g.data() + (i * 3 + ch) * plane;
      T* dst = gin.data() + (i * c + (c == 3 ? ch : 0)) * plane;
      ops::vaxpy<T>(plane, T(1) / std3[ch], src, dst);
    }
  return gin;
}

template <class T>
void Fen<T>::export_weights(const std::string& path) const {
  ArchiveWriter w;
  w.set_meta({{"kind", "fen-weights"}, {"variant", cfg_.variant}});
  size_t ci = 0;
  for (const auto& op : arch_) {
    if (op.kind != ArchOp::conv) continue;
    const nn::Conv2d<T>& conv = convs_[ci++];
    Tensor<float> wf(conv.w.shape()), bf(conv.b.shape());
    for (i64 i = 0; i < wf.numel(); ++i) wf[i] = static_cast<float>(conv.w[i]);
    for (i64 i = 0; i < bf.numel(); ++i) bf[i] = static_cast<float>(conv.b[i]);
    w.add(op.conv_name + ".w", wf);
    w.add(op.conv_name + ".b", bf);
  }
  w.write(path);
}

template <class T>
Tensor<T> gram(const Tensor<T>& f) {
  const i64 n = f.dim(0), c = f.dim(1), hw = f.dim(2) * f.dim(3);
  Tensor<T> g({n, c, c});
  const T scale = T(1) / static_cast<T>(c * hw);
  for (i64 i = 0; i < n; ++i)
    ops::gemm<T>(false, true, c, c, hw, scale, f.data() + i * c * hw, hw,
                 f.data() + i * c * hw, hw, T(0), g.data() + i * c * c, c);
  return g;
}

template <class T>
Tensor<T> gram_backward(const Tensor<T>& f, const Tensor<T>& gg) {
  const i64 n = f.dim(0), c = f.dim(1), hw = f.dim(2) * f.dim(3);
  Tensor<T> gf(f.shape());
  Tensor<T> sym({c, c});
  const T scale = T(1) / static_cast<T>(c * hw);
  for (i64 i = 0; i < n; ++i) {
    const T* g = gg.data() + i * c * c;
    for (i64 r = 0; r < c; ++r)
      for (i64 s = 0; s < c; ++s) sym[r * c + s] = g[r * c + s] + g[s * c + r];
    ops::gemm<T>(false, false, c, hw, c, scale, sym.data(), c,
                 f.data() + i * c * hw, hw, T(0), gf.data() + i * c * hw, hw);
  }
  return gf;
}

}  // namespace mdt::fen
