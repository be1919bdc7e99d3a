#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "mdt/core/archive.hpp"
#include "mdt/core/errors.hpp"
#include "mdt/metrics/metrics.hpp"
#include "mdt/model/model.hpp"

namespace mdt::metrics {

namespace {

// last activation site of a conv trunk (pooled classifier features)
std::string deepest_site(const fen::Fen<float>& f) {
  const auto arch = fen::vgg_arch(f.config().variant);
  for (auto it = arch.rbegin(); it != arch.rend(); ++it)
    if (it->kind == fen::ArchOp::conv) return it->site;
  throw std::logic_error("trunk without conv layers");
}

}  // namespace

Embedder::Embedder(const std::string& spec, const fen::Fen<float>* fen) {
  const auto colon = spec.find(':');
  const std::string mode = spec.substr(0, colon == std::string::npos ? spec.size() : colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (mode == "fen") {
    if (!fen) throw ConfigError("fen embedder requires a feature extractor");
    if (arg.empty()) throw ConfigError("embedder spec must name a layer: fen:<layer>");
    if (!fen->has_layer(arg)) throw ConfigError("unknown FEN layer: " + arg);
    fen_ = fen;
    layer_ = arg;
    id_ = "fen:" + arg + ":" + hex64(fen::fen_config_hash(fen->config()));
  } else if (mode == "inception") {
    if (arg.empty())
      throw ConfigError("embedder spec must name a weight file: inception:<path>");
    ArchiveReader ar(arg);
    if (ar.meta().value("kind", "") != "fen-weights")
      throw ConfigError("classifier weight archive expected at " + arg);
    fen::FenConfig cfg;
    cfg.variant = ar.meta().value("variant", "vgg16");
    cfg.weights_source = "pretrained-file";
    cfg.weights_path = arg;
    classifier_ = std::make_unique<fen::Fen<float>>(fen::Fen<float>::build(cfg));
    layer_ = deepest_site(*classifier_);
    id_ = "inception:" + hex64(ar.payload_hash());
  } else {
    throw ConfigError("unknown embedder spec: " + spec +
                      " (expected fen:<layer> or inception:<path>)");
  }
}

EmbeddingSet Embedder::embed(const Tensor<float>& images) const {
  const fen::Fen<float>& net = classifier_ ? *classifier_ : *fen_;
  const i64 n = images.dim(0);
  const i64 d = net.layer_channels(layer_);
  EmbeddingSet out;
  out.embedder_id = id_;
  out.vectors = Tensor<double>({n, d});

  const i64 chunk = 16;
  const i64 c = images.dim(1), h = images.dim(2), w = images.dim(3);
  for (i64 i0 = 0; i0 < n; i0 += chunk) {
    const i64 nb = std::min(chunk, n - i0);
    Tensor<float> part({nb, c, h, w});
    std::memcpy(part.data(), images.data() + i0 * c * h * w,
                sizeof(float) * static_cast<size_t>(part.numel()));
    auto maps = net.extract(part, {layer_});
    const Tensor<float>& f = maps[0].values;
    const i64 plane = f.dim(2) * f.dim(3);
    for (i64 b = 0; b < nb; ++b)
      for (i64 ch = 0; ch < d; ++ch)
        out.vectors[(i0 + b) * d + ch] =
            ops::reduce_sum<float>(plane, f.data() + (b * d + ch) * plane) /
            static_cast<double>(plane);
  }
  return out;
}

double content_similarity(const Tensor<float>& sources,
                          const Tensor<float>& transferred,
                          const fen::Fen<float>& fen,
                          const std::vector<std::string>& layers) {
  if (!sources.same_shape(transferred))
    throw std::invalid_argument("content_similarity expects aligned equal-shape batches");
  const i64 n = sources.dim(0);
  std::vector<double> dist(static_cast<size_t>(n), 0.0);

  const i64 chunk = 16;
  for (i64 i0 = 0; i0 < n; i0 += chunk) {
    const i64 nb = std::min(chunk, n - i0);
    const i64 c = sources.dim(1), h = sources.dim(2), w = sources.dim(3);
    Tensor<float> a({nb, c, h, w}), b({nb, c, h, w});
    std::memcpy(a.data(), sources.data() + i0 * c * h * w,
                sizeof(float) * static_cast<size_t>(a.numel()));
    std::memcpy(b.data(), transferred.data() + i0 * c * h * w,
                sizeof(float) * static_cast<size_t>(b.numel()));
    auto fa = fen.extract(a, layers);
    auto fb = fen.extract(b, layers);
    for (size_t l = 0; l < layers.size(); ++l) {
      const Tensor<float>& xa = fa[l].values;
      const Tensor<float>& xb = fb[l].values;
      const i64 fc = xa.dim(1), fh = xa.dim(2), fw = xa.dim(3), plane = fh * fw;
      for (i64 bb = 0; bb < nb; ++bb) {
        double acc = 0.0;
        for (i64 p = 0; p < plane; ++p) {
          double na = 0.0, nb2 = 0.0;
          const float* pa = xa.data() + bb * fc * plane + p;
          const float* pb = xb.data() + bb * fc * plane + p;
          for (i64 ch = 0; ch < fc; ++ch) {
            const double va = pa[ch * plane], vb = pb[ch * plane];
            na += va * va;
            nb2 += vb * vb;
          }
          na = std::sqrt(na) + 1e-10;
          nb2 = std::sqrt(nb2) + 1e-10;
          for (i64 ch = 0; ch < fc; ++ch) {
            const double d = pa[ch * plane] / na - pb[ch * plane] / nb2;
            acc += d * d;
          }
        }
        // squared unit-feature distance per position, averaged spatially
        dist[static_cast<size_t>(i0 + bb)] +=
            acc / static_cast<double>(plane) / static_cast<double>(layers.size());
      }
    }
  }

  double mean_d = 0.0;
  for (double d : dist) mean_d += d / (1.0 + d);  // squash to [0, 1)
  mean_d /= static_cast<double>(n);
  return (1.0 - mean_d) * 100.0;
}

namespace {

std::vector<std::uint8_t> sobel_edges(const float* img, i64 h, i64 w) {
  std::vector<float> mag(static_cast<size_t>(h * w), 0.0f);
  auto px = [&](i64 y, i64 x) {
    y = std::clamp<i64>(y, 0, h - 1);
    x = std::clamp<i64>(x, 0, w - 1);
    return img[y * w + x];
  };
  for (i64 y = 0; y < h; ++y)
    for (i64 x = 0; x < w; ++x) {
      const float gx = (px(y - 1, x + 1) + 2.0f * px(y, x + 1) + px(y + 1, x + 1)) -
                       (px(y - 1, x - 1) + 2.0f * px(y, x - 1) + px(y + 1, x - 1));
      const float gy = (px(y + 1, x - 1) + 2.0f * px(y + 1, x) + px(y + 1, x + 1)) -
                       (px(y - 1, x - 1) + 2.0f * px(y - 1, x) + px(y - 1, x + 1));
      mag[static_cast<size_t>(y * w + x)] = std::sqrt(gx * gx + gy * gy);
    }
  std::vector<float> sorted = mag;
  const size_t k = static_cast<size_t>(0.9 * static_cast<double>(sorted.size()));
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k),
                   sorted.end());
  const float thresh = sorted[k];
  std::vector<std::uint8_t> edges(mag.size());
  for (size_t i = 0; i < mag.size(); ++i) edges[i] = mag[i] > thresh ? 1 : 0;
  return edges;
}

std::vector<std::uint8_t> mask_boundaries(const Tensor<std::uint8_t>& mask) {
  const i64 h = mask.dim(0), w = mask.dim(1);
  std::vector<std::uint8_t> edges(static_cast<size_t>(h * w), 0);
  const std::uint8_t* m = mask.data();
  for (i64 y = 0; y < h; ++y)
    for (i64 x = 0; x < w; ++x) {
      const std::uint8_t v = m[y * w + x];
      const bool b = (y > 0 && m[(y - 1) * w + x] != v) ||
                     (y < h - 1 && m[(y + 1) * w + x] != v) ||
                     (x > 0 && m[y * w + x - 1] != v) ||
                     (x < w - 1 && m[y * w + x + 1] != v);
      if (b) edges[static_cast<size_t>(y * w + x)] = 1;
    }
  return edges;
}

std::vector<std::uint8_t> dilate1(const std::vector<std::uint8_t>& in, i64 h, i64 w) {
  std::vector<std::uint8_t> out(in.size(), 0);
  for (i64 y = 0; y < h; ++y)
    for (i64 x = 0; x < w; ++x) {
      bool hit = false;
      for (i64 dy = -1; dy <= 1 && !hit; ++dy)
        for (i64 dx = -1; dx <= 1 && !hit; ++dx) {
          const i64 yy = y + dy, xx = x + dx;
          if (yy >= 0 && yy < h && xx >= 0 && xx < w && in[static_cast<size_t>(yy * w + xx)])
            hit = true;
        }
      if (hit) out[static_cast<size_t>(y * w + x)] = 1;
    }
  return out;
}

}  // namespace

double structural_consistency(const std::vector<Tensor<std::uint8_t>>& masks,
                              const Tensor<float>& images) {
  const i64 n = images.dim(0), h = images.dim(2), w = images.dim(3);
  if (static_cast<i64>(masks.size()) != n)
    throw std::invalid_argument("one mask per batch element required");
  double score = 0.0;
  for (i64 b = 0; b < n; ++b) {
    if (masks[static_cast<size_t>(b)].dim(0) != h ||
        masks[static_cast<size_t>(b)].dim(1) != w)
      throw std::invalid_argument("mask spatial shape must match images");
    const auto pred = sobel_edges(images.data() + b * images.dim(1) * h * w, h, w);
    const auto gt = mask_boundaries(masks[static_cast<size_t>(b)]);
    const auto pred_d = dilate1(pred, h, w);
    const auto gt_d = dilate1(gt, h, w);

    i64 pred_n = 0, gt_n = 0, tp_p = 0, tp_r = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
      pred_n += pred[i];
      gt_n += gt[i];
      if (pred[i] && gt_d[i]) ++tp_p;
      if (gt[i] && pred_d[i]) ++tp_r;
    }
    const double precision = pred_n ? static_cast<double>(tp_p) / pred_n : 0.0;
    const double recall = gt_n ? static_cast<double>(tp_r) / gt_n : 0.0;
    score += (precision + recall > 0.0)
                 ? 2.0 * precision * recall / (precision + recall)
                 : 0.0;
  }
  return score / static_cast<double>(n);
}

MetricsReport evaluate_direction(const model::Generator<float>& gen, i64 target_slot,
                                 const Tensor<float>& source_images,
                                 const Tensor<float>& target_images,
                                 const fen::Fen<float>& fen, const Embedder& embedder,
                                 const std::vector<std::string>& similarity_layers,
                                 const std::string& source_name,
                                 const std::string& target_name) {
  const i64 n = source_images.dim(0);
  if (n < 1 || target_images.dim(0) < 1)
    throw std::invalid_argument("evaluate_direction needs non-empty image sets");

  const i64 c = source_images.dim(1), h = source_images.dim(2), w = source_images.dim(3);
  Tensor<float> transferred(source_images.shape());
  const i64 chunk = 16;
  for (i64 i0 = 0; i0 < n; i0 += chunk) {
    const i64 nb = std::min(chunk, n - i0);
    Tensor<float> part({nb, c, h, w});
    std::memcpy(part.data(), source_images.data() + i0 * c * h * w,
                sizeof(float) * static_cast<size_t>(part.numel()));
    Tensor<float> out = gen.translate(part, target_slot);
    std::memcpy(transferred.data() + i0 * c * h * w, out.data(),
                sizeof(float) * static_cast<size_t>(out.numel()));
  }

  MetricsReport r;
  r.source = source_name;
  r.target = target_name;
  r.n_images = n;
  r.fid = frechet_distance(embedder.embed(transferred), embedder.embed(target_images));
  r.content_similarity_pct =
      content_similarity(source_images, transferred, fen, similarity_layers);
  r.dpd = dpd(r.fid, r.content_similarity_pct);
  return r;
}

}  // namespace mdt::metrics
