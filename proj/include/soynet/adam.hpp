#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "soynet/errors.hpp"
#include "soynet/param.hpp"

namespace soynet {

struct AdamHyper {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-7;
};

/// Moments for one parameter list; m[i], v[i] shadow params[i].
template <typename T>
struct AdamState {
  AdamHyper hyper;
  std::int64_t step = 0;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;

  AdamState() = default;
  AdamState(const ParamList<T>& params, AdamHyper h) : hyper(h) {
    if (!(h.lr >= 0.0)) throw ConfigError("adam: lr must be >= 0");
    for (const auto* p : params) {
      m.emplace_back(p->value.shape());
      v.emplace_back(p->value.shape());
    }
  }
};

/// One bias-corrected Adam update with decoupled weight decay (param -= lr*wd*param).
template <typename T>
void adam_step(const ParamList<T>& params, AdamState<T>& state) {
  if (state.m.size() != params.size()) throw ShapeError("adam: state/parameter count mismatch");
  ++state.step;
  const AdamHyper& h = state.hyper;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(h.beta1), b2 = static_cast<T>(h.beta2);
  const T step_size = static_cast<T>(h.lr / bc1);
  const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T eps = static_cast<T>(h.eps);
  const T decay = static_cast<T>(h.lr * h.weight_decay);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Param<T>& p = *params[k];
    Tensor<T>& m = state.m[k];
    Tensor<T>& v = state.v[k];
    p.value.require_same_shape(p.grad, "adam grad");
    p.value.require_same_shape(m, "adam moment");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const T g = p.grad[i];
      m[i] = b1 * m[i] + (T{1} - b1) * g;
      v[i] = b2 * v[i] + (T{1} - b2) * g * g;
      const T denom = std::sqrt(v[i]) * inv_sqrt_bc2 + eps;
      p.value[i] -= step_size * m[i] / denom + decay * p.value[i];
    }
  }
}

}  // namespace soynet
