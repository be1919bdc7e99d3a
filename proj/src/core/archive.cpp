#include "mdt/core/archive.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mdt {

using nlohmann::json;

std::uint64_t fnv1a64(const void* data, size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

namespace {
constexpr char kMagic[6] = {'M', 'D', 'T', 'A', '1', '\n'};

template <class T>
const char* dtype_name();
template <>
const char* dtype_name<float>() {
  return "f32";
}
template <>
const char* dtype_name<double>() {
  return "f64";
}
}  // namespace

void ArchiveWriter::add_raw(const std::string& name, const std::string& dtype,
                            const std::vector<i64>& shape, const void* data,
                            size_t nbytes) {
  TensorEntry e;
  e.name = name;
  e.dtype = dtype;
  e.shape = shape;
  e.offset = payload_.size();
  e.nbytes = nbytes;
  entries_.push_back(std::move(e));
  const char* p = static_cast<const char*>(data);
  payload_.insert(payload_.end(), p, p + nbytes);
}

void ArchiveWriter::add(const std::string& name, const Tensor<float>& t) {
  add_raw(name, dtype_name<float>(), t.shape(), t.data(),
          sizeof(float) * static_cast<size_t>(t.numel()));
}

void ArchiveWriter::add(const std::string& name, const Tensor<double>& t) {
  add_raw(name, dtype_name<double>(), t.shape(), t.data(),
          sizeof(double) * static_cast<size_t>(t.numel()));
}

void ArchiveWriter::write(const std::string& path) const {
  json manifest;
  manifest["format"] = "mdt-archive-v1";
  manifest["meta"] = meta_.is_null() ? json::object() : meta_;
  json tensors = json::array();
  for (const auto& e : entries_) {
    tensors.push_back({{"name", e.name},
                       {"dtype", e.dtype},
                       {"shape", e.shape},
                       {"offset", e.offset},
                       {"nbytes", e.nbytes}});
  }
  manifest["tensors"] = std::move(tensors);
  const std::string m = manifest.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t mlen = m.size();
  out.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
  out.write(m.data(), static_cast<std::streamsize>(m.size()));
  out.write(payload_.data(), static_cast<std::streamsize>(payload_.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

ArchiveReader::ArchiveReader(const std::string& path) : path_(path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open archive: " + path);
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not an mdt archive: " + path);
  std::uint64_t mlen = 0;
  in.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
  if (!in) throw std::runtime_error("truncated archive: " + path);
  std::string m(mlen, '\0');
  in.read(m.data(), static_cast<std::streamsize>(mlen));
  if (!in) throw std::runtime_error("truncated archive manifest: " + path);

  json manifest = json::parse(m, nullptr, false);
  if (manifest.is_discarded() || manifest.value("format", "") != "mdt-archive-v1")
    throw std::runtime_error("bad archive manifest: " + path);
  meta_ = manifest.value("meta", json::object());
  for (const auto& t : manifest.value("tensors", json::array())) {
    TensorEntry e;
    e.name = t.at("name").get<std::string>();
    e.dtype = t.at("dtype").get<std::string>();
    e.shape = t.at("shape").get<std::vector<i64>>();
    e.offset = t.at("offset").get<std::uint64_t>();
    e.nbytes = t.at("nbytes").get<std::uint64_t>();
    index_[e.name] = e;
    order_.push_back(std::move(e));
  }

  payload_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  for (const auto& e : order_) {
    if (e.offset + e.nbytes > payload_.size())
      throw std::runtime_error("archive payload out of range: " + path);
  }
}

const TensorEntry& ArchiveReader::entry(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    throw std::runtime_error("archive tensor missing: " + name + " in " + path_);
  return it->second;
}

template <class T>
Tensor<T> ArchiveReader::read(const std::string& name) const {
  const TensorEntry& e = entry(name);
  if (e.dtype != dtype_name<T>())
    throw std::runtime_error("archive dtype mismatch for " + name + ": " + e.dtype);
  Tensor<T> t(e.shape);
  if (e.nbytes != sizeof(T) * static_cast<size_t>(t.numel()))
    throw std::runtime_error("archive size mismatch for " + name);
  std::memcpy(t.data(), payload_.data() + e.offset, e.nbytes);
  return t;
}

template Tensor<float> ArchiveReader::read<float>(const std::string&) const;
template Tensor<double> ArchiveReader::read<double>(const std::string&) const;

}  // namespace mdt
