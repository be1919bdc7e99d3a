#pragma once

// Perceptual supervision: content loss on extractor features, domain loss
// on Gram statistics, and their weighted combination. All mean-squared
// reductions are means over batch and elements, so the weight defaults are
// independent of image and batch size.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "mdt/core/errors.hpp"
#include "mdt/fen/fen.hpp"

namespace mdt::loss {

struct LossWeights {
  double alpha_default = 100.0;
  std::map<int, double> alpha;  // per target-domain overrides
  double lambda_content_on_transfer = 0.0;

  double alpha_for(int domain) const {
    auto it = alpha.find(domain);
    return it == alpha.end() ? alpha_default : it->second;
  }
};

inline void validate_weights(const LossWeights& w) {
  if (!(w.alpha_default > 0.0) || !std::isfinite(w.alpha_default))
    throw ConfigError("alpha must be finite and > 0");
  for (const auto& [d, a] : w.alpha)
    if (!(a > 0.0) || !std::isfinite(a))
      throw ConfigError("alpha must be finite and > 0 (domain " + std::to_string(d) + ")");
  if (w.lambda_content_on_transfer < 0.0 || !std::isfinite(w.lambda_content_on_transfer))
    throw ConfigError("lambda_content_on_transfer must be finite and >= 0");
}

struct LossReport {
  double content = 0.0;
  std::map<int, double> domain_per_target;  // unweighted
  double transfer_content = 0.0;            // unweighted sum over targets
  double total = 0.0;
};

// Precomputed references: extractor features of a fixed image batch
// (content side) and Gram matrices per layer (domain side). Both are pure
// functions of their source images, so caching them is observationally
// identical to recomputing.
template <class T>
struct ContentRef {
  std::vector<Tensor<T>> feats;  // one per content layer, in layer order
};

template <class T>
struct GramRef {
  std::vector<Tensor<T>> grams;  // one per domain layer, N x C x C
};

template <class T, class F>
ContentRef<T> make_content_ref(const F& f, const Tensor<T>& images,
                               const std::vector<std::string>& layers) {
  ContentRef<T> ref;
  for (auto& fm : f.extract(images, layers)) ref.feats.push_back(std::move(fm.values));
  return ref;
}

template <class T, class F>
GramRef<T> make_gram_ref(const F& f, const Tensor<T>& images,
                         const std::vector<std::string>& layers) {
  GramRef<T> ref;
  for (auto& fm : f.extract(images, layers))
    ref.grams.push_back(fen::gram<T>(fm.values));
  return ref;
}

namespace detail {

template <class T>
double mse(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("loss tensor shape mismatch: " + a.shape_str() +
                                " vs " + b.shape_str());
  return ops::sqdiff_sum<T>(a.numel(), a.data(), b.data()) /
         static_cast<double>(a.numel());
}

}  // namespace detail

// (1/N_c) * sum_l mean((F_l(out) - F_l(ref))^2)
template <class T, class F>
double content_loss_ref(const ContentRef<T>& ref, const F& f,
                        const Tensor<T>& out,
                        const std::vector<std::string>& layers) {
  double acc = 0.0;
  auto maps = f.extract(out, layers);
  for (size_t i = 0; i < maps.size(); ++i)
    acc += detail::mse<T>(maps[i].values, ref.feats[i]);
  return acc / static_cast<double>(layers.size());
}

template <class T, class F>
double content_loss(const F& f, const Tensor<T>& reference,
                    const Tensor<T>& out, const std::vector<std::string>& layers) {
  if (!reference.same_shape(out))
    throw std::invalid_argument("content loss image shape mismatch");
  return content_loss_ref(make_content_ref(f, reference, layers), f, out, layers);
}

// (1/N_d) * sum_l mean((G(F_l(a)) - G(F_l(b)))^2); Gram matrices are
// size-independent, so the two batches only need matching batch counts.
template <class T, class F>
double domain_loss_ref(const GramRef<T>& ref, const F& f,
                       const Tensor<T>& out,
                       const std::vector<std::string>& layers) {
  double acc = 0.0;
  auto maps = f.extract(out, layers);
  for (size_t i = 0; i < maps.size(); ++i)
    acc += detail::mse<T>(fen::gram<T>(maps[i].values), ref.grams[i]);
  return acc / static_cast<double>(layers.size());
}

template <class T, class F>
double domain_loss(const F& f, const Tensor<T>& out,
                   const Tensor<T>& target_sample,
                   const std::vector<std::string>& layers) {
  if (out.dim(0) != target_sample.dim(0))
    throw std::invalid_argument("domain loss batch size mismatch");
  return domain_loss_ref(make_gram_ref(f, target_sample, layers), f, out, layers);
}

// One generated batch, all its loss terms, and the gradient w.r.t. the
// batch, from a single extractor forward/backward over the union of layers.
template <class T>
struct BranchResult {
  double content = 0.0;
  double domain = 0.0;
  Tensor<T> image_grad;
};

template <class T>
BranchResult<T> branch_loss_grad(const fen::Fen<T>& f, const Tensor<T>& out,
                                 const ContentRef<T>* content_ref,
                                 double content_weight,
                                 const std::vector<std::string>& content_layers,
                                 const GramRef<T>* gram_ref, double domain_weight,
                                 const std::vector<std::string>& domain_layers) {
  std::vector<std::string> todo;
  if (content_ref) todo.insert(todo.end(), content_layers.begin(), content_layers.end());
  if (gram_ref)
    for (const auto& l : domain_layers)
      if (std::find(todo.begin(), todo.end(), l) == todo.end()) todo.push_back(l);

  typename fen::Fen<T>::FwdCtx ctx;
  f.forward_ctx(out, todo, ctx);

  BranchResult<T> res;
  std::map<std::string, Tensor<T>> site_grads;
  auto add_site_grad = [&](const std::string& layer, Tensor<T>&& g) {
    auto it = site_grads.find(layer);
    if (it == site_grads.end())
      site_grads.emplace(layer, std::move(g));
    else
      ops::vadd<T>(g.numel(), it->second.data(), g.data(), it->second.data());
  };

  if (content_ref) {
    const double nc = static_cast<double>(content_layers.size());
    for (size_t i = 0; i < content_layers.size(); ++i) {
      const Tensor<T>& fo = ctx.taps.at(content_layers[i]);
      const Tensor<T>& fr = content_ref->feats[i];
      res.content += detail::mse<T>(fo, fr) / nc;
      Tensor<T> g(fo.shape());
      const T scale = static_cast<T>(2.0 * content_weight /
                                     (nc * static_cast<double>(fo.numel())));
      for (i64 j = 0; j < fo.numel(); ++j) g[j] = scale * (fo[j] - fr[j]);
      add_site_grad(content_layers[i], std::move(g));
    }
  }
  if (gram_ref) {
    const double nd = static_cast<double>(domain_layers.size());
    for (size_t i = 0; i < domain_layers.size(); ++i) {
      const Tensor<T>& fo = ctx.taps.at(domain_layers[i]);
      Tensor<T> go = fen::gram<T>(fo);
      const Tensor<T>& gr = gram_ref->grams[i];
      res.domain += detail::mse<T>(go, gr) / nd;
      Tensor<T> dg(go.shape());
      const T scale = static_cast<T>(2.0 * domain_weight /
                                     (nd * static_cast<double>(go.numel())));
      for (i64 j = 0; j < go.numel(); ++j) dg[j] = scale * (go[j] - gr[j]);
      add_site_grad(domain_layers[i], fen::gram_backward<T>(fo, dg));
    }
  }

  res.image_grad = f.backward_to_input(ctx, site_grads);
  return res;
}

inline void check_finite(double v, const std::string& component) {
  if (!std::isfinite(v)) throw std::runtime_error("non-finite loss (" + component + ")");
}

// Forward-only combined objective over an identity branch and any number of
// transfer branches.
template <class T, class F>
LossReport total_loss(const F& f, const Tensor<T>& source,
                      const Tensor<T>& reconstruction,
                      const std::map<int, std::pair<const Tensor<T>*, const Tensor<T>*>>&
                          targets,  // domain -> (target sample I_X, transfer I_X')
                      const LossWeights& w,
                      const std::vector<std::string>& content_layers,
                      const std::vector<std::string>& domain_layers) {
  validate_weights(w);
  LossReport r;
  r.content = content_loss(f, source, reconstruction, content_layers);
  check_finite(r.content, "content");
  r.total = r.content;
  for (const auto& [domain, pair] : targets) {
    const double d = domain_loss(f, *pair.second, *pair.first, domain_layers);
    check_finite(d, "domain " + std::to_string(domain));
    r.domain_per_target[domain] = d;
    r.total += w.alpha_for(domain) * d;
    if (w.lambda_content_on_transfer > 0.0) {
      const double tc = content_loss(f, source, *pair.second, content_layers);
      check_finite(tc, "transfer content " + std::to_string(domain));
      r.transfer_content += tc;
    }
  }
  r.total += w.lambda_content_on_transfer * r.transfer_content;
  check_finite(r.total, "total");
  return r;
}

}  // namespace mdt::loss
