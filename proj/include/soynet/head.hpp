#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "soynet/layers.hpp"
#include "soynet/ops.hpp"

namespace soynet {

inline constexpr std::size_t kDecodeStride = 8;
inline constexpr double kDefaultThreshold = 0.5;  // confidence cut-off for counting

struct Proposal {
  double x = 0.0;
  double y = 0.0;
  double confidence = 0.0;
};

struct ProposalSet {
  std::vector<Proposal> proposals;
  std::size_t height = 0;  // source image extents
  std::size_t width = 0;

  std::size_t size() const { return proposals.size(); }
};

/// Three 3x3 convolutions with ReLU between them; no activation after the last.
template <typename T>
class ConvBranch {
 public:
  ConvBranch() = default;
  ConvBranch(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out)
      : conv_{Conv2d<T>(name + ".0", in, hidden, 3), Conv2d<T>(name + ".1", hidden, hidden, 3),
              Conv2d<T>(name + ".2", hidden, out, 3)} {}

  void init(Rng& rng) {
    for (auto& c : conv_) c.init(rng);
  }

  /// x: [C x h x w] -> [out x h x w]
  Tensor<T> forward(const Tensor<T>& x) {
    act_[0] = relu(conv_[0].forward(x));
    act_[1] = relu(conv_[1].forward(act_[0]));
    return conv_[2].forward(act_[1]);
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> g = relu_backward(act_[1], conv_[2].backward(dy));
    g = relu_backward(act_[0], conv_[1].backward(g));
    return conv_[0].backward(g);
  }

  void collect(ParamList<T>& out) {
    for (auto& c : conv_) c.collect(out);
  }

  Conv2d<T>& layer(std::size_t i) { return conv_[i]; }

 private:
  std::array<Conv2d<T>, 3> conv_;
  std::array<Tensor<T>, 2> act_;
};

template <typename T>
struct HeadOutput {
  Tensor<T> offsets;      // [h x w x 2K], (dx, dy) per anchor in pixels
  Tensor<T> logits;       // [h x w x 2K], (background, pod) per anchor
  Tensor<T> confidences;  // [h x w x K], softmax pod probability
};

/// Regression and classification branches of identical topology over Fs.
template <typename T>
class Head {
 public:
  Head() = default;
  Head(std::size_t in, std::size_t anchors)
      : anchors_(anchors),
        regression_("head.regression", in, in, 2 * anchors),
        classification_("head.classification", in, in, 2 * anchors) {
    if (anchors == 0) throw ConfigError("anchors per cell must be >= 1");
  }

  void init(Rng& rng) {
    regression_.init(rng);
    classification_.init(rng);
  }

  /// fs: [h x w x C] channels-last.
  HeadOutput<T> forward(const Tensor<T>& fs) {
    const Tensor<T> x = hwc_to_chw(fs);
    HeadOutput<T> out;
    out.offsets = chw_to_hwc(regression_.forward(x));
    out.logits = chw_to_hwc(classification_.forward(x));
    out.confidences = anchor_confidences(out.logits);
    return out;
  }

  /// Gradients w.r.t. offsets and logits (both [h x w x 2K]); returns dFs.
  Tensor<T> backward(const Tensor<T>& d_offsets, const Tensor<T>& d_logits) {
    Tensor<T> d = regression_.backward(hwc_to_chw(d_offsets));
    d += classification_.backward(hwc_to_chw(d_logits));
    return chw_to_hwc(d);
  }

  void collect(ParamList<T>& out) {
    regression_.collect(out);
    classification_.collect(out);
  }

  std::size_t anchors() const { return anchors_; }
  ConvBranch<T>& regression() { return regression_; }
  ConvBranch<T>& classification() { return classification_; }

  /// Two-class softmax per anchor; returns the pod-class probability [h x w x K].
  static Tensor<T> anchor_confidences(const Tensor<T>& logits) {
    const std::size_t h = logits.dim(0), w = logits.dim(1), k = logits.dim(2) / 2;
    Tensor<T> conf({h, w, k});
    for (std::size_t i = 0; i < h * w * k; ++i) {
      T pair[2] = {logits[2 * i], logits[2 * i + 1]};
      detail::softmax_row(pair, 2, 1);
      conf[i] = pair[1];
    }
    return conf;
  }

 private:
  std::size_t anchors_ = 1;
  ConvBranch<T> regression_, classification_;
};

/// Anchor (r, c) sits at ((c + 0.5) s, (r + 0.5) s); proposals are anchor + offset,
/// ordered row-major by cell, then anchor index.
template <typename T>
ProposalSet generate_proposals(const Tensor<T>& offsets, const Tensor<T>& confidences,
                               std::size_t stride = kDecodeStride) {
  if (offsets.rank() != 3 || confidences.rank() != 3 || offsets.dim(0) != confidences.dim(0) ||
      offsets.dim(1) != confidences.dim(1) || offsets.dim(2) != 2 * confidences.dim(2)) {
    throw ShapeError("generate_proposals: offsets " + shape_str(offsets.shape()) +
                     " not aligned with confidences " + shape_str(confidences.shape()));
  }
  const std::size_t h = offsets.dim(0), w = offsets.dim(1), k = confidences.dim(2);
  ProposalSet set;
  set.height = h * stride;
  set.width = w * stride;
  set.proposals.reserve(h * w * k);
  const double s = static_cast<double>(stride);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t a = 0; a < k; ++a) {
        const std::size_t cell = (r * w + c) * k + a;
        set.proposals.push_back({(static_cast<double>(c) + 0.5) * s + static_cast<double>(offsets[2 * cell]),
                                 (static_cast<double>(r) + 0.5) * s + static_cast<double>(offsets[2 * cell + 1]),
                                 static_cast<double>(confidences[cell])});
      }
    }
  }
  return set;
}

}  // namespace soynet
