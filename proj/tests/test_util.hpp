#pragma once

#include <cmath>
#include <vector>

#include "soynet/rng.hpp"
#include "soynet/tensor.hpp"

namespace soynet::testing {

inline Tensor<double> random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(shape);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

/// Fixed random projection used to turn a tensor-valued op into a scalar loss.
inline double project(const Tensor<double>& y, const Tensor<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
  return s;
}

}  // namespace soynet::testing

#include "soynet/gradcheck.hpp"
#include "soynet/loss.hpp"
#include "soynet/matcher.hpp"
#include "soynet/model.hpp"

namespace soynet::testing {

/// Gradient check of a layer exposing forward/backward/collect under loss = <forward(x), w>.
/// Returns the worst report over the input and every parameter tensor.
template <typename Layer>
GradCheckReport check_layer(Layer& layer, Tensor<double> x, Rng& rng, std::size_t max_probes = 64) {
  ParamList<double> params;
  layer.collect(params);
  for (auto* p : params) p->zero_grad();
  const Tensor<double> w = random_tensor(layer.forward(x).shape(), rng);
  const Tensor<double> dx = layer.backward(w);
  const auto f = [&] { return project(layer.forward(x), w); };
  GradCheckReport worst = gradient_check(f, x.values(), std::span<const double>(dx.values()), 1e-6, max_probes, 1);
  const GradCheckReport pr = gradient_check(f, params, 1e-6, max_probes, 2);
  if (!pr.finite || pr.max_rel_error > worst.max_rel_error) worst = pr;
  worst.probes += pr.probes;
  return worst;
}

/// Randomizes every parameter of a model (including norm affines) so no path is trivially zero.
inline void randomize(PodNet<double>& model, Rng& rng, double scale = 0.3) {
  for (auto* p : model.parameters())
    for (double& v : p->value.values()) v += rng.uniform(-scale, scale);
}

/// Full training loss of `model` on one scene with the match held fixed at its current value.
struct SceneLoss {
  PodNet<double>& model;
  Tensor<double> image;
  std::vector<Point> gt;
  LossConfig loss;
  MatchResult fixed;

  SceneLoss(PodNet<double>& m, Tensor<double> img, std::vector<Point> points, LossConfig cfg = {})
      : model(m), image(std::move(img)), gt(std::move(points)), loss(cfg) {
    const auto out = model.forward(image);
    fixed = match(gt, out.proposals, MatchConfig{});
  }

  double operator()() {
    const auto out = model.forward(image);
    return loss_with_grads(gt, out.head, out.proposals, fixed, loss).report.total;
  }

  /// Fills parameter gradients analytically.
  void backward() {
    model.zero_grad();
    const auto out = model.forward(image);
    const auto g = loss_with_grads(gt, out.head, out.proposals, fixed, loss);
    model.backward(g.d_offsets, g.d_logits);
  }
};

}  // namespace soynet::testing
