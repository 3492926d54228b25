#pragma once

#include <string>
#include <utility>
#include <vector>

#include "soynet/rng.hpp"
#include "soynet/tensor.hpp"

namespace soynet {

/// A trainable tensor with its accumulated gradient.
template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Param() = default;
  Param(std::string n, Shape shape, T fill = T{0})
      : name(std::move(n)), value(shape, fill), grad(shape) {}

  void zero_grad() { grad.fill(T{0}); }
  std::size_t size() const { return value.size(); }
};

template <typename T>
using ParamList = std::vector<Param<T>*>;

template <typename T>
void init_truncated_normal(Param<T>& p, Rng& rng, double sigma) {
  for (T& v : p.value.values()) v = static_cast<T>(rng.truncated_normal(sigma));
}

template <typename T>
void init_uniform(Param<T>& p, Rng& rng, double bound) {
  for (T& v : p.value.values()) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
std::size_t count_parameters(const ParamList<T>& params) {
  std::size_t n = 0;
  for (const auto* p : params) n += p->size();
  return n;
}

}  // namespace soynet
