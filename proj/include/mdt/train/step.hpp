#pragma once

// One optimization step's loss and parameter gradients, shared between the
// float training loop and the double-precision finite-difference checks.

#include <map>
#include <vector>

#include "mdt/fen/fen.hpp"
#include "mdt/loss/loss.hpp"
#include "mdt/model/model.hpp"

namespace mdt::train {

// Zeroes the generator's gradients, runs the identity branch plus one
// transfer branch per entry of `targets`, backpropagates everything and
// leaves parameter gradients accumulated in the generator. No update.
template <class T>
loss::LossReport compute_step_gradients(
    model::Generator<T>& gen, const fen::Fen<T>& fen, const Tensor<T>& src,
    const loss::ContentRef<T>& content_ref,
    const std::vector<std::pair<int, const loss::GramRef<T>*>>& targets,
    const loss::LossWeights& weights) {
  const auto& content_layers = fen.config().content_layers;
  const auto& domain_layers = fen.config().domain_layers;
  const double lambda = weights.lambda_content_on_transfer;

  gen.zero_grad();
  loss::LossReport report;

  typename model::Generator<T>::EncodeCtx enc_ctx;
  std::vector<Tensor<T>> feats = gen.encode(src, &enc_ctx);

  typename model::Generator<T>::DecodeCtx dec_ctx;
  Tensor<T> recon = gen.decode(feats, src, &dec_ctx);
  loss::BranchResult<T> res0 = loss::branch_loss_grad<T>(
      fen, recon, &content_ref, 1.0, content_layers, nullptr, 0.0, domain_layers);
  loss::check_finite(res0.content, "content");
  report.content = res0.content;
  report.total = res0.content;
  std::vector<Tensor<T>> gfeats = gen.decode_backward(res0.image_grad, dec_ctx);

  for (const auto& [slot, gram_ref] : targets) {
    typename model::Generator<T>::TransferCtx tr_ctx;
    std::vector<Tensor<T>> tfeats = gen.apply_transfer(feats, slot, &tr_ctx);
    typename model::Generator<T>::DecodeCtx dctx;
    Tensor<T> out = gen.decode(tfeats, src, &dctx);

    const double alpha = weights.alpha_for(slot);
    loss::BranchResult<T> res = loss::branch_loss_grad<T>(
        fen, out, lambda > 0.0 ? &content_ref : nullptr, lambda, content_layers,
        gram_ref, alpha, domain_layers);
    loss::check_finite(res.domain, "domain " + std::to_string(slot));
    report.domain_per_target[slot] = res.domain;
    report.total += alpha * res.domain;
    if (lambda > 0.0) {
      loss::check_finite(res.content, "transfer content " + std::to_string(slot));
      report.transfer_content += res.content;
    }

    std::vector<Tensor<T>> gtf = gen.decode_backward(res.image_grad, dctx);
    std::vector<Tensor<T>> gfr = gen.transfer_backward(gtf, slot, tr_ctx);
    for (size_t s = 0; s < gfeats.size(); ++s)
      ops::vadd<T>(gfeats[s].numel(), gfeats[s].data(), gfr[s].data(), gfeats[s].data());
  }
  report.total += lambda * report.transfer_content;
  loss::check_finite(report.total, "total");

  gen.encode_backward(std::move(gfeats), enc_ctx);
  return report;
}

// Forward-only total for the same branch structure (finite differences).
template <class T>
double compute_total_forward(
    const model::Generator<T>& gen, const fen::Fen<T>& fen, const Tensor<T>& src,
    const loss::ContentRef<T>& content_ref,
    const std::vector<std::pair<int, const loss::GramRef<T>*>>& targets,
    const loss::LossWeights& weights) {
  const auto& content_layers = fen.config().content_layers;
  const auto& domain_layers = fen.config().domain_layers;
  Tensor<T> recon = gen.reconstruct(src);
  double total = loss::content_loss_ref(content_ref, fen, recon, content_layers);
  for (const auto& [slot, gram_ref] : targets) {
    Tensor<T> out = gen.translate(src, slot);
    total += weights.alpha_for(slot) *
             loss::domain_loss_ref(*gram_ref, fen, out, domain_layers);
    if (weights.lambda_content_on_transfer > 0.0)
      total += weights.lambda_content_on_transfer *
               loss::content_loss_ref(content_ref, fen, out, content_layers);
  }
  return total;
}

}  // namespace mdt::train
