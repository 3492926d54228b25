#pragma once

// Hierarchical shifted-window transformer producing stride-8 and stride-16 maps.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "soynet/layers.hpp"
#include "soynet/ops.hpp"

namespace soynet {

struct BackboneConfig {
  std::size_t embed_dim = 96;
  std::array<std::size_t, 3> depths{2, 2, 6};
  std::array<std::size_t, 3> heads{3, 6, 12};
  std::size_t window = 7;
  double mlp_ratio = 4.0;
  bool relative_position_bias = true;

  /// Head counts follow C/32 per stage (doubling), never below one.
  static std::array<std::size_t, 3> default_heads(std::size_t c) {
    return {std::max<std::size_t>(1, c / 32), std::max<std::size_t>(1, 2 * c / 32),
            std::max<std::size_t>(1, 4 * c / 32)};
  }

  static BackboneConfig custom(std::size_t c, std::array<std::size_t, 3> depths) {
    BackboneConfig cfg;
    cfg.embed_dim = c;
    cfg.depths = depths;
    cfg.heads = default_heads(c);
    return cfg;
  }

  /// "T", "S", "B" or "L".
  static BackboneConfig variant(const std::string& name) {
    if (name == "T") return custom(96, {2, 2, 6});
    if (name == "S") return custom(96, {2, 2, 18});
    if (name == "B") return custom(128, {2, 2, 18});
    if (name == "L") return custom(192, {2, 2, 18});
    throw ConfigError("unknown backbone variant '" + name + "' (expected T, S, B or L)");
  }

  std::size_t stage_dim(std::size_t stage) const { return embed_dim << stage; }

  void validate() const {
    if (embed_dim == 0) throw ConfigError("embed_dim must be >= 1");
    if (window == 0) throw ConfigError("window must be >= 1");
    if (!(mlp_ratio > 0.0)) throw ConfigError("mlp_ratio must be > 0");
    for (std::size_t s = 0; s < 3; ++s) {
      if (heads[s] == 0 || stage_dim(s) % heads[s] != 0) {
        throw ConfigError("stage " + std::to_string(s + 1) + " width " +
                          std::to_string(stage_dim(s)) + " not divisible by head count " +
                          std::to_string(heads[s]));
      }
    }
  }
};

/// A channels-last feature grid and its stride in input pixels.
template <typename T>
struct FeatureMap {
  Tensor<T> tensor;  // [h x w x c]
  std::size_t stride = 0;
};

/// [3 x H x W] image -> [(H/4) x (W/4) x 48] raw 4x4 patches, channel-major within a token.
template <typename T>
Tensor<T> patch_split(const Tensor<T>& image) {
  if (image.rank() != 3 || image.dim(0) != 3) throw ShapeError("patch_split expects 3xHxW");
  const std::size_t h = image.dim(1), w = image.dim(2);
  if (h % 4 || w % 4) {
    throw ShapeError("patch_split: extents " + shape_str(image.shape()) + " not divisible by 4");
  }
  const std::size_t ph = h / 4, pw = w / 4;
  Tensor<T> tokens({ph, pw, 48});
  for (std::size_t i = 0; i < ph; ++i)
    for (std::size_t j = 0; j < pw; ++j)
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t dy = 0; dy < 4; ++dy)
          for (std::size_t dx = 0; dx < 4; ++dx)
            tokens(i, j, c * 16 + dy * 4 + dx) = image(c, 4 * i + dy, 4 * j + dx);
  return tokens;
}

/// Multi-head self-attention inside non-overlapping windows.
template <typename T>
class WindowAttention {
 public:
  WindowAttention() = default;
  WindowAttention(const std::string& name, std::size_t dim, std::size_t heads, std::size_t window,
                  bool rel_bias)
      : dim_(dim),
        heads_(heads),
        window_(window),
        rel_bias_(rel_bias),
        qkv_(name + ".qkv", dim, 3 * dim),
        proj_(name + ".proj", dim, dim) {
    if (rel_bias_) {
      bias_table_ = Param<T>(name + ".relative_position_bias_table",
                             {(2 * window - 1) * (2 * window - 1), heads});
    }
  }

  void init(Rng& rng) {
    qkv_.init(rng);
    proj_.init(rng);
    if (rel_bias_) init_truncated_normal(bias_table_, rng, kInitSigma);
  }

  /// windows: [nW x N x C], N = win^2 for the given (possibly clamped) window size.
  /// mask: empty or [nW x N x N] additive.
  Tensor<T> forward(const Tensor<T>& windows, std::size_t win, const std::vector<T>& mask) {
    const std::size_t nw = windows.dim(0), n = windows.dim(1), d = dim_ / heads_;
    win_ = win;
    build_rel_index(win);
    mask_ = mask;
    qkv_out_ = qkv_.forward(windows.reshaped({nw * n, dim_}));
    probs_.assign(nw * heads_ * n * n, T{0});
    const T scale = T{1} / std::sqrt(static_cast<T>(d));
    Tensor<T> out({nw * n, dim_});
    std::vector<T> q(n * d), k(n * d), v(n * d), o(n * d);
    for (std::size_t b = 0; b < nw; ++b) {
      for (std::size_t h = 0; h < heads_; ++h) {
        gather_qkv(b, h, n, d, q.data(), k.data(), v.data());
        for (T& x : q) x *= scale;
        T* p = probs_.data() + (b * heads_ + h) * n * n;
        detail::gemm_nt(n, n, d, q.data(), d, k.data(), d, p, n, false);
        add_bias_and_mask(p, b, h, n);
        for (std::size_t i = 0; i < n; ++i) detail::softmax_row(p + i * n, n, 1);
        detail::gemm_nn(n, d, n, p, n, v.data(), d, o.data(), d, false);
        for (std::size_t i = 0; i < n; ++i) std::copy_n(o.data() + i * d, d, out.data() + (b * n + i) * dim_ + h * d);
      }
    }
    nw_ = nw;
    n_ = n;
    return proj_.forward(out).reshaped({nw, n, dim_});
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const std::size_t nw = nw_, n = n_, d = dim_ / heads_;
    const T scale = T{1} / std::sqrt(static_cast<T>(d));
    const Tensor<T> dout = proj_.backward(dy.reshaped({nw * n, dim_}));
    Tensor<T> dqkv({nw * n, 3 * dim_});
    std::vector<T> q(n * d), k(n * d), v(n * d), dO(n * d), dq(n * d), dk(n * d), dv(n * d);
    std::vector<T> dp(n * n), ds(n * n);
    for (std::size_t b = 0; b < nw; ++b) {
      for (std::size_t h = 0; h < heads_; ++h) {
        gather_qkv(b, h, n, d, q.data(), k.data(), v.data());
        for (T& x : q) x *= scale;
        const T* p = probs_.data() + (b * heads_ + h) * n * n;
        for (std::size_t i = 0; i < n; ++i) std::copy_n(dout.data() + (b * n + i) * dim_ + h * d, d, dO.data() + i * d);
        detail::gemm_tn(n, d, n, p, n, dO.data(), d, dv.data(), d, false);
        detail::gemm_nt(n, n, d, dO.data(), d, v.data(), d, dp.data(), n, false);
        for (std::size_t i = 0; i < n; ++i) detail::softmax_row_backward(p + i * n, dp.data() + i * n, ds.data() + i * n, n, 1);
        if (rel_bias_) {
          T* tg = bias_table_.grad.data();
          for (std::size_t e = 0; e < n * n; ++e) tg[rel_index_[e] * heads_ + h] += ds[e];
        }
        detail::gemm_nn(n, d, n, ds.data(), n, k.data(), d, dq.data(), d, false);
        detail::gemm_tn(n, d, n, ds.data(), n, q.data(), d, dk.data(), d, false);
        for (std::size_t i = 0; i < n; ++i) {
          T* row = dqkv.data() + (b * n + i) * 3 * dim_;
          for (std::size_t t = 0; t < d; ++t) {
            row[h * d + t] = dq[i * d + t] * scale;
            row[dim_ + h * d + t] = dk[i * d + t];
            row[2 * dim_ + h * d + t] = dv[i * d + t];
          }
        }
      }
    }
    return qkv_.backward(dqkv).reshaped({nw, n, dim_});
  }

  void collect(ParamList<T>& out) {
    qkv_.collect(out);
    proj_.collect(out);
    if (rel_bias_) out.push_back(&bias_table_);
  }

  Linear<T>& proj() { return proj_; }
  Linear<T>& qkv() { return qkv_; }

 private:
  void gather_qkv(std::size_t b, std::size_t h, std::size_t n, std::size_t d, T* q, T* k, T* v) const {
    for (std::size_t i = 0; i < n; ++i) {
      const T* row = qkv_out_.data() + (b * n + i) * 3 * dim_;
      std::copy_n(row + h * d, d, q + i * d);
      std::copy_n(row + dim_ + h * d, d, k + i * d);
      std::copy_n(row + 2 * dim_ + h * d, d, v + i * d);
    }
  }

  void add_bias_and_mask(T* s, std::size_t b, std::size_t h, std::size_t n) const {
    if (rel_bias_) {
      const T* table = bias_table_.value.data();
      for (std::size_t e = 0; e < n * n; ++e) s[e] += table[rel_index_[e] * heads_ + h];
    }
    if (!mask_.empty()) {
      const T* m = mask_.data() + b * n * n;
      for (std::size_t e = 0; e < n * n; ++e) s[e] += m[e];
    }
  }

  // Indexes the (2*window-1)^2 table; a clamped window reuses the central part of it.
  void build_rel_index(std::size_t win) {
    const std::size_t n = win * win, span = 2 * window_ - 1;
    rel_index_.resize(n * n);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t c = 0; c < n; ++c) {
        const std::size_t dy = a / win + window_ - 1 - c / win;
        const std::size_t dx = a % win + window_ - 1 - c % win;
        rel_index_[a * n + c] = dy * span + dx;
      }
    }
  }

  std::size_t dim_ = 0, heads_ = 1, window_ = 7, win_ = 7;
  bool rel_bias_ = true;
  Linear<T> qkv_, proj_;
  Param<T> bias_table_;
  std::vector<std::size_t> rel_index_;
  std::vector<T> mask_;
  Tensor<T> qkv_out_;
  std::vector<T> probs_;
  std::size_t nw_ = 0, n_ = 0;
};

/// Additive attention mask separating regions that a cyclic shift made adjacent.
template <typename T>
std::vector<T> shifted_window_mask(std::size_t hp, std::size_t wp, std::size_t win, std::size_t shift) {
  std::vector<int> label(hp * wp);
  const auto region = [&](std::size_t i, std::size_t extent) {
    return i < extent - win ? 0 : (i < extent - shift ? 1 : 2);
  };
  for (std::size_t i = 0; i < hp; ++i)
    for (std::size_t j = 0; j < wp; ++j) label[i * wp + j] = region(i, hp) * 3 + region(j, wp);
  const std::size_t nh = hp / win, nwc = wp / win, n = win * win;
  std::vector<T> mask(nh * nwc * n * n, T{0});
  for (std::size_t bi = 0; bi < nh; ++bi) {
    for (std::size_t bj = 0; bj < nwc; ++bj) {
      T* m = mask.data() + (bi * nwc + bj) * n * n;
      for (std::size_t a = 0; a < n; ++a) {
        const int la = label[(bi * win + a / win) * wp + bj * win + a % win];
        for (std::size_t c = 0; c < n; ++c) {
          const int lc = label[(bi * win + c / win) * wp + bj * win + c % win];
          if (la != lc) m[a * n + c] = T{-100};
        }
      }
    }
  }
  return mask;
}

/// Pre-norm transformer block: x + WMSA(LN(x)), then x + MLP(LN(x)).
template <typename T>
class SwinBlock {
 public:
  SwinBlock() = default;
  SwinBlock(const std::string& name, std::size_t dim, std::size_t heads, std::size_t window,
            bool shifted, double mlp_ratio, bool rel_bias)
      : window_(window),
        shifted_(shifted),
        norm1_(name + ".norm1", dim),
        attn_(name + ".attn", dim, heads, window, rel_bias),
        norm2_(name + ".norm2", dim),
        fc1_(name + ".mlp.fc1", dim, static_cast<std::size_t>(std::lround(dim * mlp_ratio))),
        fc2_(name + ".mlp.fc2", static_cast<std::size_t>(std::lround(dim * mlp_ratio)), dim) {}

  void init(Rng& rng) {
    attn_.init(rng);
    fc1_.init(rng);
    fc2_.init(rng);
  }

  /// Window actually used for an h x w grid and the shift applied.
  std::pair<std::size_t, std::size_t> geometry(std::size_t h, std::size_t w) const {
    if (std::min(h, w) <= window_) return {std::min(h, w), 0};
    return {window_, shifted_ ? window_ / 2 : 0};
  }

  Tensor<T> forward(const Tensor<T>& x) {
    h_ = x.dim(0);
    w_ = x.dim(1);
    const std::size_t c = x.dim(2);
    const auto [win, shift] = geometry(h_, w_);
    win_ = win;
    shift_ = shift;
    Tensor<T> t = pad_to_multiple(norm1_.forward(x), win);
    hp_ = t.dim(0);
    wp_ = t.dim(1);
    if (shift) t = roll_hw(t, -static_cast<std::ptrdiff_t>(shift), -static_cast<std::ptrdiff_t>(shift));
    const std::vector<T> mask = shift ? shifted_window_mask<T>(hp_, wp_, win, shift) : std::vector<T>{};
    t = window_reverse(attn_.forward(window_partition(t, win), win, mask), win, hp_, wp_);
    if (shift) t = roll_hw(t, static_cast<std::ptrdiff_t>(shift), static_cast<std::ptrdiff_t>(shift));
    Tensor<T> x1 = crop_hw(t, h_, w_);
    x1 += x;
    hidden_ = fc1_.forward(norm2_.forward(x1).reshaped({h_ * w_, c}));
    Tensor<T> y = fc2_.forward(gelu(hidden_)).reshaped({h_, w_, c});
    y += x1;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const std::size_t c = dy.dim(2);
    Tensor<T> dh = fc2_.backward(dy.reshaped({h_ * w_, c}));
    dh = gelu_backward(hidden_, std::move(dh));
    Tensor<T> dx1 = norm2_.backward(fc1_.backward(dh).reshaped({h_, w_, c}));
    dx1 += dy;
    Tensor<T> t = pad_to_multiple(dx1, win_);
    const auto s = static_cast<std::ptrdiff_t>(shift_);
    if (shift_) t = roll_hw(t, -s, -s);
    t = window_reverse(attn_.backward(window_partition(t, win_)), win_, hp_, wp_);
    if (shift_) t = roll_hw(t, s, s);
    Tensor<T> dx = norm1_.backward(crop_hw(t, h_, w_));
    dx += dx1;
    return dx;
  }

  void collect(ParamList<T>& out) {
    norm1_.collect(out);
    attn_.collect(out);
    norm2_.collect(out);
    fc1_.collect(out);
    fc2_.collect(out);
  }

  WindowAttention<T>& attention() { return attn_; }
  Linear<T>& fc2() { return fc2_; }

 private:
  std::size_t window_ = 7;
  bool shifted_ = false;
  LayerNorm<T> norm1_;
  WindowAttention<T> attn_;
  LayerNorm<T> norm2_;
  Linear<T> fc1_, fc2_;
  Tensor<T> hidden_;
  std::size_t h_ = 0, w_ = 0, hp_ = 0, wp_ = 0, win_ = 0, shift_ = 0;
};

/// [h x w x c] -> [(h/2) x (w/2) x 2c]: concat 2x2 neighbours, norm, project.
template <typename T>
class PatchMerging {
 public:
  PatchMerging() = default;
  PatchMerging(const std::string& name, std::size_t dim)
      : dim_(dim), norm_(name + ".norm", 4 * dim), reduction_(name + ".reduction", 4 * dim, 2 * dim, false) {}

  void init(Rng& rng) { reduction_.init(rng); }

  Tensor<T> forward(const Tensor<T>& x) {
    const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
    if (h % 2 || w % 2) throw ShapeError("patch_merging: odd extents " + shape_str(x.shape()));
    h_ = h;
    w_ = w;
    Tensor<T> cat({h / 2, w / 2, 4 * c});
    for (std::size_t i = 0; i < h / 2; ++i)
      for (std::size_t j = 0; j < w / 2; ++j)
        for (std::size_t q = 0; q < 4; ++q)
          std::copy_n(x.data() + ((2 * i + q % 2) * w + 2 * j + q / 2) * c, c,
                      cat.data() + (i * (w / 2) + j) * 4 * c + q * c);
    return reduction_.forward(norm_.forward(cat));
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const Tensor<T> dcat = norm_.backward(reduction_.backward(dy));
    const std::size_t c = dim_;
    Tensor<T> dx({h_, w_, c});
    for (std::size_t i = 0; i < h_ / 2; ++i)
      for (std::size_t j = 0; j < w_ / 2; ++j)
        for (std::size_t q = 0; q < 4; ++q)
          std::copy_n(dcat.data() + (i * (w_ / 2) + j) * 4 * c + q * c, c,
                      dx.data() + ((2 * i + q % 2) * w_ + 2 * j + q / 2) * c);
    return dx;
  }

  void collect(ParamList<T>& out) {
    norm_.collect(out);
    reduction_.collect(out);
  }

  Linear<T>& reduction() { return reduction_; }
  LayerNorm<T>& norm() { return norm_; }

 private:
  std::size_t dim_ = 0;
  LayerNorm<T> norm_;
  Linear<T> reduction_;
  std::size_t h_ = 0, w_ = 0;
};

/// Raw 4x4 patches -> linear embedding to C -> layer norm.
template <typename T>
class PatchEmbed {
 public:
  PatchEmbed() = default;
  PatchEmbed(const std::string& name, std::size_t dim)
      : proj_(name + ".proj", 48, dim), norm_(name + ".norm", dim) {}

  void init(Rng& rng) { proj_.init(rng); }

  Tensor<T> forward(const Tensor<T>& image) { return norm_.forward(proj_.forward(patch_split(image))); }

  /// Parameter gradients only; the image needs none.
  void backward(const Tensor<T>& dy) { proj_.backward(norm_.backward(dy)); }

  void collect(ParamList<T>& out) {
    proj_.collect(out);
    norm_.collect(out);
  }

 private:
  Linear<T> proj_;
  LayerNorm<T> norm_;
};

template <typename T>
class Backbone {
 public:
  Backbone() = default;
  explicit Backbone(const BackboneConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    embed_ = PatchEmbed<T>("backbone.patch_embed", cfg.embed_dim);
    for (std::size_t s = 0; s < 3; ++s) {
      const std::size_t dim = cfg.stage_dim(s);
      if (s > 0) merges_.emplace_back("backbone.stages." + std::to_string(s) + ".downsample", cfg.stage_dim(s - 1));
      auto& blocks = stages_.emplace_back();
      for (std::size_t b = 0; b < cfg.depths[s]; ++b) {
        blocks.emplace_back("backbone.stages." + std::to_string(s) + ".blocks." + std::to_string(b), dim,
                            cfg.heads[s], cfg.window, b % 2 == 1, cfg.mlp_ratio, cfg.relative_position_bias);
      }
    }
    norm_f2_ = LayerNorm<T>("backbone.norm_f2", cfg.stage_dim(1));
    norm_f3_ = LayerNorm<T>("backbone.norm_f3", cfg.stage_dim(2));
  }

  void init(Rng& rng) {
    embed_.init(rng);
    for (auto& m : merges_) m.init(rng);
    for (auto& st : stages_)
      for (auto& b : st) b.init(rng);
  }

  /// image [3 x H x W], H and W multiples of 16.
  std::pair<FeatureMap<T>, FeatureMap<T>> forward(const Tensor<T>& image) {
    if (image.rank() != 3 || image.dim(0) != 3) throw ShapeError("backbone expects a 3xHxW image");
    if (image.dim(1) % 16 || image.dim(2) % 16) {
      throw ShapeError("backbone: image extents " + shape_str(image.shape()) + " must be multiples of 16");
    }
    Tensor<T> x = embed_.forward(image);
    for (auto& b : stages_[0]) x = b.forward(x);
    x = merges_[0].forward(x);
    for (auto& b : stages_[1]) x = b.forward(x);
    FeatureMap<T> f2{norm_f2_.forward(x), 8};
    x = merges_[1].forward(x);
    for (auto& b : stages_[2]) x = b.forward(x);
    FeatureMap<T> f3{norm_f3_.forward(x), 16};
    return {std::move(f2), std::move(f3)};
  }

  void backward(const Tensor<T>& df2, const Tensor<T>& df3) {
    Tensor<T> g = norm_f3_.backward(df3);
    for (auto it = stages_[2].rbegin(); it != stages_[2].rend(); ++it) g = it->backward(g);
    g = merges_[1].backward(g);
    g += norm_f2_.backward(df2);
    for (auto it = stages_[1].rbegin(); it != stages_[1].rend(); ++it) g = it->backward(g);
    g = merges_[0].backward(g);
    for (auto it = stages_[0].rbegin(); it != stages_[0].rend(); ++it) g = it->backward(g);
    embed_.backward(g);
  }

  void collect(ParamList<T>& out) {
    embed_.collect(out);
    for (std::size_t s = 0; s < 3; ++s) {
      if (s > 0) merges_[s - 1].collect(out);
      for (auto& b : stages_[s]) b.collect(out);
    }
    norm_f2_.collect(out);
    norm_f3_.collect(out);
  }

  const BackboneConfig& config() const { return cfg_; }
  std::vector<SwinBlock<T>>& stage(std::size_t s) { return stages_[s]; }

 private:
  BackboneConfig cfg_;
  PatchEmbed<T> embed_;
  std::vector<std::vector<SwinBlock<T>>> stages_;
  std::vector<PatchMerging<T>> merges_;
  LayerNorm<T> norm_f2_, norm_f3_;
};

}  // namespace soynet
