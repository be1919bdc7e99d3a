#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdt {

using i64 = std::int64_t;

// Dense row-major tensor. Image and feature tensors use NCHW throughout.
template <class T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<i64> shape) : shape_(std::move(shape)) {
    i64 n = 1;
    for (i64 d : shape_) {
      if (d < 0) throw std::invalid_argument("negative tensor dimension");
      n *= d;
    }
    data_.assign(static_cast<size_t>(n), T(0));
  }

  static Tensor zeros(std::vector<i64> shape) { return Tensor(std::move(shape)); }

  bool empty() const { return data_.empty(); }
  i64 numel() const { return static_cast<i64>(data_.size()); }
  int ndim() const { return static_cast<int>(shape_.size()); }
  i64 dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  const std::vector<i64>& shape() const { return shape_; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](i64 i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](i64 i) const { return data_[static_cast<size_t>(i)]; }

  T& at(i64 n, i64 c, i64 h, i64 w) {
    return data_[static_cast<size_t>(((n * dim(1) + c) * dim(2) + h) * dim(3) + w)];
  }
  const T& at(i64 n, i64 c, i64 h, i64 w) const {
    return data_[static_cast<size_t>(((n * dim(1) + c) * dim(2) + h) * dim(3) + w)];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  // Reinterprets the buffer with a new shape of equal element count.
  Tensor reshaped(std::vector<i64> shape) const {
    Tensor out;
    out.shape_ = std::move(shape);
    i64 n = 1;
    for (i64 d : out.shape_) n *= d;
    if (n != numel()) throw std::invalid_argument("reshape element count mismatch");
    out.data_ = data_;
    return out;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape_[i]);
    }
    return s + "]";
  }

 private:
  std::vector<i64> shape_;
  std::vector<T> data_;
};

}  // namespace mdt
