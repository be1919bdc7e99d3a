#pragma once

// Transfer-quality evaluation: Fréchet distance between embedding
// distributions, a perceptual content-similarity percentage, their
// domain-perceptual-distance combination, and an edge-alignment score
// against ground-truth masks.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mdt/core/tensor.hpp"
#include "mdt/fen/fen.hpp"

namespace mdt::model {
template <class T>
class Generator;
}

namespace mdt::metrics {

struct EmbeddingSet {
  Tensor<double> vectors;  // N x D
  std::string embedder_id;
  i64 count() const { return vectors.dim(0); }
  i64 dim() const { return vectors.dim(1); }
};

// ||mu_A - mu_B||^2 + tr(S_A + S_B - 2 (S_A S_B)^{1/2}) with unbiased
// covariances; the matrix square root comes from an eigendecomposition of
// the symmetrized product. Warns to stderr when N < D + 1.
double frechet_distance(const EmbeddingSet& a, const EmbeddingSet& b);

// fid + lambda * (1 - similarity/100) * 100
double dpd(double fid, double content_similarity_pct, double lambda = 1.0);

// Embedders. fen-layer mode pools a named extractor layer; classifier mode
// runs a conv net described by a weight archive and pools its last feature
// map. Sets from different embedders refuse to mix.
class Embedder {
 public:
  // spec: "fen:<layer>" (uses `fen`) or "inception:<path to weight archive>"
  Embedder(const std::string& spec, const fen::Fen<float>* fen);
  EmbeddingSet embed(const Tensor<float>& images) const;
  const std::string& id() const { return id_; }

 private:
  std::string id_;
  std::string layer_;
  const fen::Fen<float>* fen_ = nullptr;
  std::unique_ptr<fen::Fen<float>> classifier_;
};

// Mean perceptual distance between aligned pairs, mapped to a similarity
// percentage in (0, 100]. Features are unit-normalized across channels at
// each spatial position before comparison; the per-pair distance is
// squashed by d/(1+d) to stay below 1.
double content_similarity(const Tensor<float>& sources,
                          const Tensor<float>& transferred,
                          const fen::Fen<float>& fen,
                          const std::vector<std::string>& layers);

// Boundary F1 between Sobel edges of each image (binarized at the 90th
// percentile) and ground-truth label boundaries, with 1 px dilation as
// matching tolerance. Masks are HxW label maps, one per batch element.
double structural_consistency(const std::vector<Tensor<std::uint8_t>>& masks,
                              const Tensor<float>& images);

struct MetricsReport {
  std::string source;
  std::string target;
  double fid = 0.0;
  double content_similarity_pct = 0.0;
  double dpd = 0.0;
  i64 n_images = 0;
};

// Translates every source image into the target domain and scores the
// result against the target set.
MetricsReport evaluate_direction(const model::Generator<float>& gen,
                                 i64 target_slot,
                                 const Tensor<float>& source_images,
                                 const Tensor<float>& target_images,
                                 const fen::Fen<float>& fen,
                                 const Embedder& embedder,
                                 const std::vector<std::string>& similarity_layers,
                                 const std::string& source_name,
                                 const std::string& target_name);

}  // namespace mdt::metrics
