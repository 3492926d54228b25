#pragma once

#include "soynet/backbone.hpp"
#include "soynet/layers.hpp"

namespace soynet {

/// Fs = F2 + project(upsample2x(F3)), project a learned 1x1 map 4C -> 2C.
template <typename T>
class Neck {
 public:
  Neck() = default;
  explicit Neck(std::size_t embed_dim) : project_("neck.project", 4 * embed_dim, 2 * embed_dim) {}

  void init(Rng& rng) { project_.init(rng); }

  FeatureMap<T> forward(const FeatureMap<T>& f2, const FeatureMap<T>& f3) {
    const Tensor<T>& a = f2.tensor;
    const Tensor<T>& b = f3.tensor;
    if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != 2 * b.dim(0) || a.dim(1) != 2 * b.dim(1)) {
      throw ShapeError("neck: F3 " + shape_str(b.shape()) + " is not half the extent of F2 " +
                       shape_str(a.shape()));
    }
    if (b.dim(2) != project_.in_features() || a.dim(2) != project_.out_features()) {
      throw ShapeError("neck: channel widths do not match the projection");
    }
    // A 1x1 projection commutes with nearest upsampling, so project at the coarse resolution.
    Tensor<T> fs = nearest_upsample2x_hwc(project_.forward(b));
    fs += a;
    return {std::move(fs), 8};
  }

  /// Returns (dF2, dF3).
  std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& dfs) {
    Tensor<T> df3 = project_.backward(nearest_upsample2x_hwc_backward(dfs));
    return {dfs, std::move(df3)};
  }

  void collect(ParamList<T>& out) { project_.collect(out); }
  Linear<T>& projection() { return project_; }

 private:
  Linear<T> project_;
};

}  // namespace soynet
