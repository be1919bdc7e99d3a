#pragma once

// Optimization loop: joint identity + per-target transfer objective,
// Adam with a mid-training step decay, per-domain iteration balancing,
// JSON-lines logging and resumable checkpoints.

#include <map>
#include <string>
#include <vector>

#include "mdt/data/dataset.hpp"
#include "mdt/fen/fen.hpp"
#include "mdt/loss/loss.hpp"
#include "mdt/model/model.hpp"
#include "mdt/model/model_io.hpp"
#include "mdt/nn/adam.hpp"

namespace mdt::train {

struct TrainConfig {
  int source_domain = 0;
  std::vector<int> target_domains;
  i64 total_iters = 1;
  i64 batch = 4;
  double base_lr = 1e-3;
  double decay_factor = 0.1;
  double decay_at = 0.5;  // fraction of total_iters
  std::uint64_t seed = 0;
  loss::LossWeights weights;
  i64 checkpoint_every = 1000;
};

void validate_train_config(const TrainConfig& cfg);

// Step schedule: base_lr before decay_at * total_iters, decayed after.
double lr_at(i64 iter, const TrainConfig& cfg);

// Epoch counts that give every domain roughly `budget` training iterations.
std::map<std::string, i64> epochs_for_budget(const std::map<std::string, i64>& sizes,
                                             i64 budget);

// Per-domain total iterations from epoch counts: epochs * ceil(size/batch).
std::map<std::string, i64> balance_iterations(const std::map<std::string, i64>& sizes,
                                              const std::map<std::string, i64>& epochs,
                                              i64 batch);

struct TrainLogEntry {
  i64 iter = 0;
  loss::LossReport report;  // domain entries keyed by dataset domain id
  double lr = 0.0;
};

struct TrainLog {
  std::vector<TrainLogEntry> entries;
  std::vector<double> wall_per_100;  // seconds
  std::string final_checkpoint;
};

// Single-writer optimizer around one generator. Works in model slot space;
// slot s translates into cfg.target_domains[s].
class Trainer {
 public:
  Trainer(model::Generator<float> gen, const fen::Fen<float>* fen, TrainConfig cfg);

  // One optimization step on explicit image batches (keys are model slots).
  // Returns the pre-update loss report.
  loss::LossReport training_step(const Tensor<float>& source_batch,
                                 const std::map<int, Tensor<float>>& target_batches);

  // Same step against precomputed references (the cached fast path; results
  // are identical because the references are pure functions of the images).
  loss::LossReport step_with_refs(
      const Tensor<float>& source_batch, const loss::ContentRef<float>& content_ref,
      const std::vector<std::pair<int, const loss::GramRef<float>*>>& targets);

  model::Generator<float>& generator() { return gen_; }
  const model::Generator<float>& generator() const { return gen_; }
  nn::Adam<float>& adam() { return adam_; }
  const TrainConfig& config() const { return cfg_; }
  i64 iteration() const { return iter_; }
  void set_iteration(i64 it) { iter_ = it; }

 private:
  model::Generator<float> gen_;
  const fen::Fen<float>* fen_;
  TrainConfig cfg_;
  nn::Adam<float> adam_;
  i64 iter_ = 0;
};

struct TrainResult {
  TrainLog log;
  model::CheckpointMeta final_meta;
};

// Full run: preloads the datasets, caches target Gram references and source
// content features, optimizes for cfg.total_iters steps, writes the
// JSON-lines log plus periodic and final checkpoints under out_dir.
TrainResult train(const TrainConfig& cfg, const std::vector<data::DomainDataset>& datasets,
                  model::ModelConfig mcfg, const fen::FenConfig& fcfg,
                  const std::string& out_dir, i64 image_h, i64 image_w,
                  const std::string& resume_path = "");

// FNV-1a hash over all parameter bytes, in parameter-name order.
std::string parameter_hash(model::Generator<float>& gen);

}  // namespace mdt::train
