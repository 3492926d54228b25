#pragma once

#include <cstdint>
#include <string>

#include "soynet/backbone.hpp"
#include "soynet/head.hpp"
#include "soynet/neck.hpp"

namespace soynet {

struct ModelConfig {
  std::string variant = "T";  // T, S, B, L or "custom"
  BackboneConfig backbone = BackboneConfig::variant("T");
  std::size_t anchors = 1;    // K proposals per stride-8 cell

  static ModelConfig from_variant(const std::string& v, std::size_t anchors = 1) {
    return {v, BackboneConfig::variant(v), anchors};
  }
  static ModelConfig custom(std::size_t c, std::array<std::size_t, 3> depths, std::size_t anchors = 1) {
    return {"custom", BackboneConfig::custom(c, depths), anchors};
  }
};

/// Everything one forward pass produces.
template <typename T>
struct ModelOutput {
  FeatureMap<T> f2, f3, fs;
  HeadOutput<T> head;
  ProposalSet proposals;
};

/// Backbone -> neck -> head point-proposal network.
template <typename T>
class PodNet {
 public:
  PodNet() = default;
  explicit PodNet(const ModelConfig& cfg)
      : cfg_(cfg),
        backbone_(cfg.backbone),
        neck_(cfg.backbone.embed_dim),
        head_(2 * cfg.backbone.embed_dim, cfg.anchors) {
    collect_all();
  }

  PodNet(const PodNet& o) : cfg_(o.cfg_), backbone_(o.backbone_), neck_(o.neck_), head_(o.head_) {
    collect_all();
  }
  PodNet& operator=(const PodNet& o) {
    if (this != &o) {
      cfg_ = o.cfg_;
      backbone_ = o.backbone_;
      neck_ = o.neck_;
      head_ = o.head_;
      collect_all();
    }
    return *this;
  }

  void init(std::uint64_t seed) {
    Rng rng(seed);
    backbone_.init(rng);
    neck_.init(rng);
    head_.init(rng);
  }

  /// image [3 x H x W], extents multiples of 16, finite values.
  ModelOutput<T> forward(const Tensor<T>& image) {
    require_finite(image, "model input");
    ModelOutput<T> out;
    std::tie(out.f2, out.f3) = backbone_.forward(image);
    out.fs = neck_.forward(out.f2, out.f3);
    out.head = head_.forward(out.fs.tensor);
    out.proposals = generate_proposals(out.head.offsets, out.head.confidences, kDecodeStride);
    return out;
  }

  /// Backpropagates from the head outputs of the most recent forward; accumulates grads.
  void backward(const Tensor<T>& d_offsets, const Tensor<T>& d_logits) {
    const Tensor<T> dfs = head_.backward(d_offsets, d_logits);
    auto [df2, df3] = neck_.backward(dfs);
    backbone_.backward(df2, df3);
  }

  const ParamList<T>& parameters() const { return params_; }
  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }
  std::size_t parameter_count() const { return count_parameters(params_); }

  const ModelConfig& config() const { return cfg_; }
  Backbone<T>& backbone() { return backbone_; }
  Neck<T>& neck() { return neck_; }
  Head<T>& head() { return head_; }

 private:
  void collect_all() {
    params_.clear();
    backbone_.collect(params_);
    neck_.collect(params_);
    head_.collect(params_);
  }

  ModelConfig cfg_;
  Backbone<T> backbone_;
  Neck<T> neck_;
  Head<T> head_;
  ParamList<T> params_;
};

}  // namespace soynet
