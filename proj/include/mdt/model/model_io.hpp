#pragma once

// Checkpoint format: flat tensor archive whose manifest carries the model
// config, a hash of that config, the feature-extractor config hash, the
// training iteration and the domain-name table. Optimizer state rides along
// under adam.* names so training can resume exactly.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mdt/model/model.hpp"
#include "mdt/nn/adam.hpp"

namespace mdt::model {

struct CheckpointMeta {
  ModelConfig config;
  std::uint64_t iteration = 0;
  std::string source_domain;
  std::vector<std::string> target_domains;  // slot order
  std::string fen_config_hash;
};

void save_checkpoint(const std::string& path, Generator<float>& gen,
                     const CheckpointMeta& meta,
                     const nn::Adam<float>* adam = nullptr);

CheckpointMeta read_checkpoint_meta(const std::string& path);

// Rebuilds the generator from the embedded config and loads every
// parameter. Refuses a manifest whose stored config hash does not match its
// own config unless `override_hash` is set.
Generator<float> load_checkpoint(const std::string& path, CheckpointMeta* meta_out,
                                 bool override_hash = false,
                                 nn::Adam<float>* adam_out = nullptr);

}  // namespace mdt::model
