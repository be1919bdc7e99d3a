#include "mdt/train/train.hpp"

#include "mdt/train/step.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "mdt/core/errors.hpp"
#include "mdt/core/parallel.hpp"

namespace fs = std::filesystem;

namespace mdt::train {

using nlohmann::json;

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.total_iters < 1) throw ConfigError("total_iters must be >= 1");
  if (cfg.batch < 1) throw ConfigError("batch must be >= 1");
  if (!(cfg.decay_at > 0.0 && cfg.decay_at < 1.0))
    throw ConfigError("decay_at must lie strictly between 0 and 1");
  if (!(cfg.base_lr > 0.0)) throw ConfigError("base_lr must be > 0");
  if (!(cfg.decay_factor > 0.0)) throw ConfigError("decay_factor must be > 0");
  if (cfg.target_domains.empty()) throw ConfigError("target_domains must be non-empty");
  std::vector<int> sorted = cfg.target_domains;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ConfigError("target_domains must be duplicate-free");
  for (int d : cfg.target_domains)
    if (d == cfg.source_domain)
      throw ConfigError("target_domains must not contain the source domain");
  loss::validate_weights(cfg.weights);
}

double lr_at(i64 iter, const TrainConfig& cfg) {
  const double boundary = cfg.decay_at * static_cast<double>(cfg.total_iters);
  return static_cast<double>(iter) < boundary ? cfg.base_lr
                                              : cfg.base_lr * cfg.decay_factor;
}

std::map<std::string, i64> epochs_for_budget(const std::map<std::string, i64>& sizes,
                                             i64 budget) {
  std::map<std::string, i64> out;
  for (const auto& [name, size] : sizes) {
    if (size < 1) throw ConfigError("domain size must be >= 1: " + name);
    out[name] = std::max<i64>(
        1, static_cast<i64>(std::llround(static_cast<double>(budget) /
                                         static_cast<double>(size))));
  }
  return out;
}

std::map<std::string, i64> balance_iterations(const std::map<std::string, i64>& sizes,
                                              const std::map<std::string, i64>& epochs,
                                              i64 batch) {
  if (batch < 1) throw ConfigError("batch must be >= 1");
  std::map<std::string, i64> out;
  for (const auto& [name, size] : sizes) {
    auto it = epochs.find(name);
    if (it == epochs.end()) throw ConfigError("missing epoch count for " + name);
    out[name] = it->second * ((size + batch - 1) / batch);
  }
  return out;
}

Trainer::Trainer(model::Generator<float> gen, const fen::Fen<float>* fen,
                 TrainConfig cfg)
    : gen_(std::move(gen)), fen_(fen), cfg_(std::move(cfg)) {}

loss::LossReport Trainer::training_step(const Tensor<float>& source_batch,
                                        const std::map<int, Tensor<float>>& target_batches) {
  const auto& content_layers = fen_->config().content_layers;
  const auto& domain_layers = fen_->config().domain_layers;
  loss::ContentRef<float> content_ref =
      loss::make_content_ref(*fen_, source_batch, content_layers);
  std::vector<loss::GramRef<float>> gram_storage;
  gram_storage.reserve(target_batches.size());
  std::vector<std::pair<int, const loss::GramRef<float>*>> targets;
  for (const auto& [slot, batch] : target_batches) {
    gram_storage.push_back(loss::make_gram_ref(*fen_, batch, domain_layers));
    targets.emplace_back(slot, &gram_storage.back());
  }
  return step_with_refs(source_batch, content_ref, targets);
}

loss::LossReport Trainer::step_with_refs(
    const Tensor<float>& src, const loss::ContentRef<float>& content_ref,
    const std::vector<std::pair<int, const loss::GramRef<float>*>>& targets) {
  loss::LossReport report =
      compute_step_gradients<float>(gen_, *fen_, src, content_ref, targets, cfg_.weights);
  auto params = gen_.parameters();
  adam_.step(params, lr_at(iter_, cfg_));
  ++iter_;
  return report;
}

std::string parameter_hash(model::Generator<float>& gen) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto& p : gen.parameters()) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.value->data());
    const size_t n = sizeof(float) * static_cast<size_t>(p.value->numel());
    for (size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return hex64(h);
}

namespace {

// batch-dimension stack of equally shaped tensors
Tensor<float> stack_batch(const std::vector<const Tensor<float>*>& parts) {
  std::vector<i64> shape = parts[0]->shape();
  i64 per = 1;
  for (size_t d = 1; d < shape.size(); ++d) per *= shape[d];
  shape[0] = 0;
  for (const auto* p : parts) shape[0] += p->dim(0);
  Tensor<float> out(shape);
  i64 off = 0;
  for (const auto* p : parts) {
    std::memcpy(out.data() + off, p->data(),
                sizeof(float) * static_cast<size_t>(p->numel()));
    off += p->numel();
  }
  return out;
}

struct ImageCache {
  std::vector<Tensor<float>> images;                     // per image, 1xCxHxW
  std::vector<std::vector<Tensor<float>>> content_feats;  // [img][layer]
  std::vector<std::vector<Tensor<float>>> grams;          // [img][layer]
};

ImageCache preload_domain(const data::DomainDataset& ds, i64 h, i64 w,
                          const fen::Fen<float>& fen, bool want_content,
                          bool want_grams) {
  ImageCache cache;
  const i64 n = ds.count();
  cache.images.resize(static_cast<size_t>(n));
  if (want_content) cache.content_feats.resize(static_cast<size_t>(n));
  if (want_grams) cache.grams.resize(static_cast<size_t>(n));
  const auto& ccfg = fen.config();
  parallel_for(n, env_workers(), [&](i64 i) {
    const size_t si = static_cast<size_t>(i);
    cache.images[si] = data::load_image(ds.image_paths[si], h, w);
    if (want_content) {
      auto ref = loss::make_content_ref(fen, cache.images[si], ccfg.content_layers);
      cache.content_feats[si] = std::move(ref.feats);
    }
    if (want_grams) {
      auto ref = loss::make_gram_ref(fen, cache.images[si], ccfg.domain_layers);
      cache.grams[si] = std::move(ref.grams);
    }
  });
  return cache;
}

std::uint64_t stream_seed(std::uint64_t seed, i64 iter, int role) {
  return rng_fold(rng_fold(seed, 0x5001u + static_cast<std::uint64_t>(role)),
                  static_cast<std::uint64_t>(iter));
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::vector<data::DomainDataset>& datasets,
                  model::ModelConfig mcfg, const fen::FenConfig& fcfg,
                  const std::string& out_dir, i64 image_h, i64 image_w,
                  const std::string& resume_path) {
  validate_train_config(cfg);
  auto dataset_of = [&](int id) -> const data::DomainDataset& {
    for (const auto& d : datasets)
      if (d.domain_id == id) return d;
    throw ConfigError("domain id " + std::to_string(id) + " not present in datasets");
  };
  const data::DomainDataset& source_ds = dataset_of(cfg.source_domain);
  const int n_targets = static_cast<int>(cfg.target_domains.size());
  mcfg.n_domains = n_targets;
  validate_model_config(mcfg);

  fen::Fen<float> fen = fen::Fen<float>::build(fcfg);
  fs::create_directories(out_dir);

  // slot-keyed weights (slot s <-> cfg.target_domains[s])
  TrainConfig slot_cfg = cfg;
  slot_cfg.weights.alpha.clear();
  for (int s = 0; s < n_targets; ++s)
    slot_cfg.weights.alpha[s] = cfg.weights.alpha_for(cfg.target_domains[static_cast<size_t>(s)]);

  // caches: decoded images everywhere, content features for the source,
  // Gram references for every target
  ImageCache source_cache = preload_domain(source_ds, image_h, image_w, fen, true, false);
  std::vector<ImageCache> target_caches;
  std::vector<const data::DomainDataset*> target_ds;
  for (int id : cfg.target_domains) {
    target_ds.push_back(&dataset_of(id));
    target_caches.push_back(preload_domain(*target_ds.back(), image_h, image_w, fen,
                                           false, true));
  }

  model::CheckpointMeta meta;
  meta.config = mcfg;
  meta.source_domain = source_ds.name;
  for (const auto* d : target_ds) meta.target_domains.push_back(d->name);
  meta.fen_config_hash = hex64(fen::fen_config_hash(fcfg));

  i64 start_iter = 0;
  nn::Adam<float> resume_adam;
  std::unique_ptr<model::Generator<float>> gen;
  if (!resume_path.empty()) {
    model::CheckpointMeta loaded;
    gen = std::make_unique<model::Generator<float>>(
        model::load_checkpoint(resume_path, &loaded, false, &resume_adam));
    if (model::model_config_hash(loaded.config) != model::model_config_hash(mcfg))
      throw ConfigError("resume checkpoint was trained with a different model config");
    if (loaded.fen_config_hash != meta.fen_config_hash)
      throw ConfigError("resume checkpoint was trained with a different FEN config");
    start_iter = static_cast<i64>(loaded.iteration);
  } else {
    gen = std::make_unique<model::Generator<float>>(mcfg, rng_fold(cfg.seed, 0x1417));
  }

  Trainer trainer(std::move(*gen), &fen, slot_cfg);
  trainer.set_iteration(start_iter);
  if (!resume_path.empty()) {
    trainer.adam() = std::move(resume_adam);
    trainer.adam().set_iterations(start_iter);
  }

  std::ofstream log_stream(fs::path(out_dir) / "train-log.jsonl",
                           start_iter == 0 ? std::ios::trunc : std::ios::app);
  if (!log_stream) throw std::runtime_error("cannot open training log in " + out_dir);

  TrainResult result;
  auto flush_log = [&] { log_stream.flush(); };
  auto save = [&](const std::string& path, i64 iter) {
    meta.iteration = static_cast<std::uint64_t>(iter);
    try {
      model::save_checkpoint(path, trainer.generator(), meta, &trainer.adam());
    } catch (...) {
      flush_log();
      throw;
    }
  };

  auto wall_start = std::chrono::steady_clock::now();
  for (i64 iter = start_iter; iter < cfg.total_iters; ++iter) {
    const double lr = lr_at(iter, cfg);

    const auto src_idx =
        data::sample_indices(source_ds.count(), cfg.batch, stream_seed(cfg.seed, iter, 0));
    std::vector<const Tensor<float>*> parts;
    for (i64 i : src_idx) parts.push_back(&source_cache.images[static_cast<size_t>(i)]);
    Tensor<float> src = stack_batch(parts);

    loss::ContentRef<float> content_ref;
    for (size_t l = 0; l < fen.config().content_layers.size(); ++l) {
      std::vector<const Tensor<float>*> fparts;
      for (i64 i : src_idx)
        fparts.push_back(&source_cache.content_feats[static_cast<size_t>(i)][l]);
      content_ref.feats.push_back(stack_batch(fparts));
    }

    std::vector<loss::GramRef<float>> gram_refs(static_cast<size_t>(n_targets));
    std::vector<std::pair<int, const loss::GramRef<float>*>> targets;
    for (int s = 0; s < n_targets; ++s) {
      const auto tgt_idx = data::sample_indices(
          target_ds[static_cast<size_t>(s)]->count(), cfg.batch,
          stream_seed(cfg.seed, iter, 1 + s));
      for (size_t l = 0; l < fen.config().domain_layers.size(); ++l) {
        std::vector<const Tensor<float>*> gparts;
        for (i64 i : tgt_idx)
          gparts.push_back(&target_caches[static_cast<size_t>(s)].grams[static_cast<size_t>(i)][l]);
        gram_refs[static_cast<size_t>(s)].grams.push_back(stack_batch(gparts));
      }
      targets.emplace_back(s, &gram_refs[static_cast<size_t>(s)]);
    }

    loss::LossReport report = trainer.step_with_refs(src, content_ref, targets);

    // report and log with dataset domain ids
    loss::LossReport public_report = report;
    public_report.domain_per_target.clear();
    json domains_json = json::object();
    for (const auto& [slot, v] : report.domain_per_target) {
      const int id = cfg.target_domains[static_cast<size_t>(slot)];
      public_report.domain_per_target[id] = v;
      domains_json[std::to_string(id)] = v;
    }
    json line = {{"iter", iter},
                 {"content", report.content},
                 {"domain", domains_json},
                 {"total", report.total},
                 {"lr", lr}};
    if (cfg.weights.lambda_content_on_transfer > 0.0)
      line["transfer_content"] = report.transfer_content;
    log_stream << line.dump() << "\n";
    if (iter % 50 == 49) flush_log();

    result.log.entries.push_back({iter, std::move(public_report), lr});

    if ((iter + 1) % 100 == 0) {
      const auto now = std::chrono::steady_clock::now();
      result.log.wall_per_100.push_back(
          std::chrono::duration<double>(now - wall_start).count());
      wall_start = now;
    }
    if (cfg.checkpoint_every > 0 && (iter + 1) % cfg.checkpoint_every == 0 &&
        iter + 1 < cfg.total_iters)
      save((fs::path(out_dir) / ("checkpoint-" + std::to_string(iter + 1) + ".mdt")).string(),
           iter + 1);
  }

  const std::string final_path = (fs::path(out_dir) / "model.ckpt").string();
  save(final_path, cfg.total_iters);
  result.log.final_checkpoint = final_path;
  flush_log();

  json summary = {{"iters", cfg.total_iters},
                  {"final_checkpoint", final_path},
                  {"wall_per_100", result.log.wall_per_100}};
  std::ofstream(fs::path(out_dir) / "train-summary.json") << summary.dump(2) << "\n";

  meta.iteration = static_cast<std::uint64_t>(cfg.total_iters);
  result.final_meta = meta;
  return result;
}

}  // namespace mdt::train
