#pragma once

#include <cmath>
#include <map>
#include <string>

#include "mdt/core/ops.hpp"
#include "mdt/nn/layers.hpp"

namespace mdt::nn {

// Adam with per-parameter state keyed by parameter name, so optimizer state
// survives checkpoint round-trips independent of construction order.
template <class T>
class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<ParamRef<T>>& params, double lr) {
    ++t_;
    const T bias1 = static_cast<T>(1.0 - std::pow(beta1_, static_cast<double>(t_)));
    const T bias2 = static_cast<T>(1.0 - std::pow(beta2_, static_cast<double>(t_)));
    for (auto& p : params) {
      Tensor<T>& m = state(m_, p);
      Tensor<T>& v = state(v_, p);
      ops::adam_step<T>(p.value->numel(), p.value->data(), p.grad->data(),
                        m.data(), v.data(), static_cast<T>(lr),
                        static_cast<T>(beta1_), static_cast<T>(beta2_),
                        static_cast<T>(eps_), bias1, bias2);
    }
  }

  i64 iterations() const { return t_; }
  void set_iterations(i64 t) { t_ = t; }
  std::map<std::string, Tensor<T>>& moment1() { return m_; }
  std::map<std::string, Tensor<T>>& moment2() { return v_; }
  const std::map<std::string, Tensor<T>>& moment1() const { return m_; }
  const std::map<std::string, Tensor<T>>& moment2() const { return v_; }

 private:
  Tensor<T>& state(std::map<std::string, Tensor<T>>& store, const ParamRef<T>& p) {
    auto it = store.find(p.name);
    if (it == store.end())
      it = store.emplace(p.name, Tensor<T>(p.value->shape())).first;
    return it->second;
  }

  double beta1_, beta2_, eps_;
  i64 t_ = 0;
  std::map<std::string, Tensor<T>> m_, v_;
};

}  // namespace mdt::nn
