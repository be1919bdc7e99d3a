#include "mdt/model/model_io.hpp"

#include <stdexcept>

#include "mdt/core/archive.hpp"
#include "mdt/core/errors.hpp"

namespace mdt::model {

using nlohmann::json;

void save_checkpoint(const std::string& path, Generator<float>& gen,
                     const CheckpointMeta& meta, const nn::Adam<float>* adam) {
  ArchiveWriter w;
  json j;
  j["kind"] = "mdt-checkpoint";
  json cfg;
  to_json(cfg, meta.config);
  j["model"] = cfg;
  j["config_hash"] = hex64(model_config_hash(meta.config));
  j["fen_config_hash"] = meta.fen_config_hash;
  j["iteration"] = meta.iteration;
  j["source_domain"] = meta.source_domain;
  j["target_domains"] = meta.target_domains;
  if (adam) j["adam_iterations"] = adam->iterations();
  w.set_meta(j);

  for (auto& p : gen.parameters()) w.add(p.name, *p.value);
  if (adam) {
    for (const auto& [name, t] : adam->moment1()) w.add("adam.m." + name, t);
    for (const auto& [name, t] : adam->moment2()) w.add("adam.v." + name, t);
  }
  w.write(path);
}

namespace {

CheckpointMeta meta_from_archive(const ArchiveReader& ar, const std::string& path) {
  const json& m = ar.meta();
  if (m.value("kind", "") != "mdt-checkpoint")
    throw std::runtime_error("not a checkpoint archive: " + path);
  CheckpointMeta meta;
  from_json(m.at("model"), meta.config);
  meta.iteration = m.value("iteration", 0ULL);
  meta.source_domain = m.value("source_domain", "");
  meta.target_domains = m.value("target_domains", std::vector<std::string>{});
  meta.fen_config_hash = m.value("fen_config_hash", "");
  return meta;
}

}  // namespace

CheckpointMeta read_checkpoint_meta(const std::string& path) {
  ArchiveReader ar(path);
  return meta_from_archive(ar, path);
}

Generator<float> load_checkpoint(const std::string& path, CheckpointMeta* meta_out,
                                 bool override_hash, nn::Adam<float>* adam_out) {
  ArchiveReader ar(path);
  CheckpointMeta meta = meta_from_archive(ar, path);

  const std::string stored = ar.meta().value("config_hash", "");
  const std::string computed = hex64(model_config_hash(meta.config));
  if (stored != computed && !override_hash)
    throw ConfigError("checkpoint config hash mismatch (" + stored + " vs " +
                      computed + "); pass the override flag to load anyway");

  Generator<float> gen(meta.config, 0);
  for (auto& p : gen.parameters()) {
    Tensor<float> t = ar.read<float>(p.name);
    if (t.shape() != p.value->shape())
      throw std::runtime_error("checkpoint tensor shape mismatch for " + p.name);
    *p.value = std::move(t);
  }

  if (adam_out) {
    adam_out->set_iterations(ar.meta().value("adam_iterations", 0LL));
    for (auto& p : gen.parameters()) {
      if (ar.has("adam.m." + p.name))
        adam_out->moment1()[p.name] = ar.read<float>("adam.m." + p.name);
      if (ar.has("adam.v." + p.name))
        adam_out->moment2()[p.name] = ar.read<float>("adam.v." + p.name);
    }
  }
  if (meta_out) *meta_out = meta;
  return gen;
}

}  // namespace mdt::model
