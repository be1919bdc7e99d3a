#pragma once

// Flat tensor archive: a JSON manifest followed by raw little-endian tensor
// payloads. Used for feature-extractor weights, model checkpoints and the
// pluggable embedding networks.
//
// Layout: "MDTA1\n" | u64 manifest byte length | manifest JSON | payload.
// The manifest has a caller-owned "meta" object and a "tensors" array of
// {name, dtype (f32|f64), shape, offset, nbytes} with offsets relative to
// the payload start.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mdt/core/tensor.hpp"
#include "json.hpp"

namespace mdt {

std::uint64_t fnv1a64(const void* data, size_t n);
std::string hex64(std::uint64_t v);

struct TensorEntry {
  std::string name;
  std::string dtype;
  std::vector<i64> shape;
  std::uint64_t offset = 0;
  std::uint64_t nbytes = 0;
};

class ArchiveWriter {
 public:
  void set_meta(nlohmann::json meta) { meta_ = std::move(meta); }
  void add(const std::string& name, const Tensor<float>& t);
  void add(const std::string& name, const Tensor<double>& t);
  void write(const std::string& path) const;

 private:
  void add_raw(const std::string& name, const std::string& dtype,
               const std::vector<i64>& shape, const void* data, size_t nbytes);
  nlohmann::json meta_;
  std::vector<TensorEntry> entries_;
  std::vector<char> payload_;
};

class ArchiveReader {
 public:
  explicit ArchiveReader(const std::string& path);

  const nlohmann::json& meta() const { return meta_; }
  const std::vector<TensorEntry>& entries() const { return order_; }
  std::uint64_t payload_hash() const { return fnv1a64(payload_.data(), payload_.size()); }
  bool has(const std::string& name) const { return index_.count(name) != 0; }
  const TensorEntry& entry(const std::string& name) const;

  template <class T>
  Tensor<T> read(const std::string& name) const;

 private:
  std::string path_;
  nlohmann::json meta_;
  std::vector<TensorEntry> order_;
  std::map<std::string, TensorEntry> index_;
  std::vector<char> payload_;
};

}  // namespace mdt
