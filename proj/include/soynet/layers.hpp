#pragma once

// Stateful layers: each owns its parameters and caches what its backward pass
// needs from the most recent forward call. One forward per backward.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "soynet/ops.hpp"
#include "soynet/param.hpp"

namespace soynet {

inline constexpr double kInitSigma = 0.02;

/// y = x W + b on the last axis; x is [rows x in].
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, bool bias = true)
      : in_(in), out_(out), has_bias_(bias), weight_(name + ".weight", {in, out}) {
    if (bias) bias_ = Param<T>(name + ".bias", {out});
  }

  void init(Rng& rng) {
    init_truncated_normal(weight_, rng, kInitSigma);
    if (has_bias_) bias_.value.fill(T{0});
  }

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.shape().back() != in_) throw ShapeError("linear " + weight_.name + ": bad input width");
    input_ = x;
    const std::size_t rows = x.size() / in_;
    Shape os = x.shape();
    os.back() = out_;
    Tensor<T> y(os);
    if (has_bias_)
      for (std::size_t r = 0; r < rows; ++r) std::copy_n(bias_.value.data(), out_, y.data() + r * out_);
    detail::gemm_nn(rows, out_, in_, x.data(), in_, weight_.value.data(), out_, y.data(), out_, true);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const std::size_t rows = dy.size() / out_;
    detail::gemm_tn(in_, out_, rows, input_.data(), in_, dy.data(), out_, weight_.grad.data(), out_, true);
    if (has_bias_) {
      T* db = bias_.grad.data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < out_; ++j) db[j] += dy[r * out_ + j];
    }
    Shape is = dy.shape();
    is.back() = in_;
    Tensor<T> dx(is);
    detail::gemm_nt(rows, in_, out_, dy.data(), out_, weight_.value.data(), out_, dx.data(), in_, false);
    return dx;
  }

  void collect(ParamList<T>& out) {
    out.push_back(&weight_);
    if (has_bias_) out.push_back(&bias_);
  }

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }
  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }

 private:
  std::size_t in_ = 0, out_ = 0;
  bool has_bias_ = true;
  Param<T> weight_, bias_;
  Tensor<T> input_;
};

template <typename T>
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(const std::string& name, std::size_t dim, T eps = T{1e-5})
      : eps_(eps), gamma_(name + ".weight", {dim}, T{1}), beta_(name + ".bias", {dim}) {}

  Tensor<T> forward(const Tensor<T>& x) {
    return layer_norm(x, std::span<const T>(gamma_.value.values()),
                      std::span<const T>(beta_.value.values()), eps_, &cache_);
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    return layer_norm_backward(dy, cache_, std::span<const T>(gamma_.value.values()),
                               gamma_.grad.values(), beta_.grad.values());
  }

  void collect(ParamList<T>& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }

  Param<T>& gamma() { return gamma_; }
  Param<T>& beta() { return beta_; }

 private:
  T eps_ = T{1e-5};
  Param<T> gamma_, beta_;
  LayerNormCache<T> cache_;
};

/// Square-kernel convolution on [C x H x W], same padding (k/2).
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, std::size_t in, std::size_t out, std::size_t k)
      : k_(k), weight_(name + ".weight", {out, in, k, k}), bias_(name + ".bias", {out}) {}

  // Uniform(+-1/sqrt(fan_in)), the usual default for conv layers.
  void init(Rng& rng) {
    const std::size_t fan_in = weight_.value.dim(1) * k_ * k_;
    init_uniform(weight_, rng, 1.0 / std::sqrt(static_cast<double>(fan_in)));
    init_uniform(bias_, rng, 1.0 / std::sqrt(static_cast<double>(fan_in)));
  }

  Tensor<T> forward(const Tensor<T>& x) {
    input_ = x;
    return conv2d(x, weight_.value, std::span<const T>(bias_.value.values()), 1, k_ / 2);
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    auto g = conv2d_backward(input_, weight_.value, dy, 1, k_ / 2);
    weight_.grad += g.dweight;
    for (std::size_t o = 0; o < g.dbias.size(); ++o) bias_.grad[o] += g.dbias[o];
    return std::move(g.dx);
  }

  void collect(ParamList<T>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }

 private:
  std::size_t k_ = 3;
  Param<T> weight_, bias_;
  Tensor<T> input_;
};

}  // namespace soynet
