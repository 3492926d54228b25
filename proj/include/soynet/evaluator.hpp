#pragma once

// Thresholded inference, counting metrics and overlay rendering.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "soynet/data.hpp"
#include "soynet/image_io.hpp"
#include "soynet/matcher.hpp"
#include "soynet/model.hpp"

namespace soynet {

struct InferenceResult {
  ProposalSet kept;  // proposals with confidence > threshold, in image coordinates
  std::size_t count() const { return kept.size(); }
};

/// Keeps proposals whose confidence is strictly above `threshold`.
inline ProposalSet threshold_proposals(const ProposalSet& all, double threshold) {
  ProposalSet out;
  out.height = all.height;
  out.width = all.width;
  for (const Proposal& p : all.proposals)
    if (p.confidence > threshold) out.proposals.push_back(p);
  return out;
}

/// All proposals for an image whose extents are multiples of 16.
template <typename T>
ProposalSet predict_all(PodNet<T>& model, const Image& image) {
  if constexpr (std::is_same_v<T, float>) {
    return model.forward(image).proposals;
  } else {
    return model.forward(image.template cast<T>()).proposals;
  }
}

struct TileOptions {
  std::size_t tile = kCropSize;
  std::size_t stride = 192;
  double merge_radius = 4.0;  // cross-tile duplicates closer than this are merged
};

namespace detail {

inline std::vector<std::size_t> tile_origins(std::size_t extent, const TileOptions& opt) {
  std::vector<std::size_t> o;
  if (extent <= opt.tile) return {0};
  for (std::size_t p = 0; p + opt.tile < extent; p += opt.stride) o.push_back(p);
  if (o.empty() || o.back() + opt.tile < extent) o.push_back(extent - opt.tile);
  return o;
}

/// Copies `img` into the top-left of a zero image of the given extents.
inline Image pad_image(const Image& img, std::size_t h, std::size_t w) {
  const std::size_t ih = img.dim(1), iw = img.dim(2);
  if (ih == h && iw == w) return img;
  Image out({3, h, w});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < ih; ++y)
      std::copy_n(img.data() + (c * ih + y) * iw, iw, out.data() + (c * h + y) * w);
  return out;
}

inline Image crop_image(const Image& img, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  const std::size_t ih = img.dim(1), iw = img.dim(2);
  Image out({3, h, w});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      std::copy_n(img.data() + (c * ih + y0 + y) * iw + x0, w, out.data() + (c * h + y) * w);
  return out;
}

}  // namespace detail

/// Overlapping tiles, thresholded per tile, merged; of two proposals from different
/// tiles closer than merge_radius, only the more confident survives.
template <typename T>
ProposalSet infer_tiled(PodNet<T>& model, const Image& image, double threshold, const TileOptions& opt = {}) {
  const std::size_t h = image.dim(1), w = image.dim(2);
  const Image padded = detail::pad_image(image, std::max(h, opt.tile), std::max(w, opt.tile));
  const std::size_t ph = padded.dim(1), pw = padded.dim(2);
  struct Candidate {
    Proposal p;
    std::size_t tile;
    std::size_t order;
  };
  std::vector<Candidate> cands;
  std::size_t tile_index = 0;
  for (std::size_t y0 : detail::tile_origins(ph, opt)) {
    for (std::size_t x0 : detail::tile_origins(pw, opt)) {
      const ProposalSet ps = predict_all(model, detail::crop_image(padded, y0, x0, opt.tile, opt.tile));
      for (const Proposal& p : ps.proposals) {
        if (!(p.confidence > threshold)) continue;
        const Proposal q{p.x + static_cast<double>(x0), p.y + static_cast<double>(y0), p.confidence};
        if (q.x < 0.0 || q.y < 0.0 || q.x >= static_cast<double>(w) || q.y >= static_cast<double>(h)) continue;
        cands.push_back({q, tile_index, cands.size()});
      }
      ++tile_index;
    }
  }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.p.confidence > b.p.confidence; });
  std::vector<Candidate> kept;
  for (const Candidate& c : cands) {
    const bool dup = std::any_of(kept.begin(), kept.end(), [&](const Candidate& k) {
      return k.tile != c.tile && std::hypot(k.p.x - c.p.x, k.p.y - c.p.y) < opt.merge_radius;
    });
    if (!dup) kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end(), [](const Candidate& a, const Candidate& b) { return a.order < b.order; });
  ProposalSet out;
  out.height = h;
  out.width = w;
  for (const Candidate& c : kept) out.proposals.push_back(c.p);
  return out;
}

/// Zero-pads bottom/right to multiples of 16 and runs the whole image at once.
template <typename T>
ProposalSet infer_padded(PodNet<T>& model, const Image& image, double threshold) {
  const std::size_t h = image.dim(1), w = image.dim(2);
  const Image padded = detail::pad_image(image, (h + 15) / 16 * 16, (w + 15) / 16 * 16);
  ProposalSet all = predict_all(model, padded);
  ProposalSet out;
  out.height = h;
  out.width = w;
  for (const Proposal& p : all.proposals) {
    if (p.confidence > threshold && p.x >= 0.0 && p.y >= 0.0 && p.x < static_cast<double>(w) &&
        p.y < static_cast<double>(h)) {
      out.proposals.push_back(p);
    }
  }
  return out;
}

/// Counts pods: direct when extents are multiples of 16, tiled otherwise.
template <typename T>
InferenceResult infer(PodNet<T>& model, const Image& image, double threshold = kDefaultThreshold) {
  if (image.rank() != 3 || image.dim(0) != 3) throw ShapeError("infer expects a 3xHxW image");
  require_finite(image, "inference image");
  if (image.dim(1) % 16 == 0 && image.dim(2) % 16 == 0) {
    return {threshold_proposals(predict_all(model, image), threshold)};
  }
  return {infer_tiled(model, image, threshold)};
}

/// Mean distance between ground truth and the proposals the matcher pairs them with.
inline double mean_matched_distance(const std::vector<Point>& gt, const ProposalSet& props, const MatchConfig& cfg) {
  if (gt.empty()) return 0.0;
  const MatchResult m = match(gt, props, cfg);
  double s = 0.0;
  for (const auto& [i, j] : m.pairs) s += std::hypot(gt[i].x - props.proposals[j].x, gt[i].y - props.proposals[j].y);
  return s / static_cast<double>(gt.size());
}

// ---------------------------------------------------------------------------

struct MetricsReport {
  double mae = 0.0;
  double rmse = 0.0;
  double rmae = 0.0;
  double acc = 0.0;
  double rrmse = 0.0;
  double r2 = 0.0;
  double pearson_r = 0.0;
  std::size_t n = 0;
  std::size_t zero_gt_excluded = 0;  // items left out of rmae/rrmse because G_i = 0
};

/// Counting metrics over predicted counts P and ground-truth counts G.
///   R^2 = 1 - sum (P-G)^2 / sum (P - mean G)^2   (note: P, not G, in the denominator)
///   r   = standard Pearson correlation
/// Undefined quantities are NaN.
inline MetricsReport metrics(std::span<const double> p, std::span<const double> g) {
  if (p.size() != g.size()) throw ValidationError("metrics: predicted and ground-truth lengths differ");
  if (p.empty()) throw ValidationError("metrics: need at least one sample");
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  const std::size_t n = p.size();
  const double dn = static_cast<double>(n);
  MetricsReport r;
  r.n = n;
  double abs_sum = 0.0, sq_sum = 0.0, rel_abs = 0.0, rel_sq = 0.0;
  std::size_t rel_n = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = p[i] - g[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    if (g[i] != 0.0) {
      rel_abs += std::abs(e) / g[i];
      rel_sq += (e * e) / (g[i] * g[i]);
      ++rel_n;
    }
  }
  r.zero_gt_excluded = n - rel_n;
  r.mae = abs_sum / dn;
  r.rmse = std::sqrt(sq_sum / dn);
  r.rmae = rel_n ? rel_abs / static_cast<double>(rel_n) : nan;
  r.acc = 1.0 - r.rmae;
  r.rrmse = rel_n ? std::sqrt(rel_sq / static_cast<double>(rel_n)) : nan;

  const double gbar = std::accumulate(g.begin(), g.end(), 0.0) / dn;
  const double pbar = std::accumulate(p.begin(), p.end(), 0.0) / dn;
  double r2_den = 0.0;
  for (std::size_t i = 0; i < n; ++i) r2_den += (p[i] - gbar) * (p[i] - gbar);
  r.r2 = r2_den > 0.0 ? 1.0 - sq_sum / r2_den : (sq_sum == 0.0 ? 1.0 : nan);

  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (p[i] - pbar) * (g[i] - gbar);
    sxx += (p[i] - pbar) * (p[i] - pbar);
    syy += (g[i] - gbar) * (g[i] - gbar);
  }
  r.pearson_r = (n >= 2 && sxx > 0.0 && syy > 0.0) ? sxy / (std::sqrt(sxx) * std::sqrt(syy)) : nan;
  return r;
}

inline MetricsReport metrics(const std::vector<double>& p, const std::vector<double>& g) {
  return metrics(std::span<const double>(p), std::span<const double>(g));
}

inline nlohmann::json to_json(const MetricsReport& r) {
  const auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"mae", num(r.mae)},     {"rmse", num(r.rmse)},   {"rmae", num(r.rmae)},
          {"acc", num(r.acc)},     {"rrmse", num(r.rrmse)}, {"r2", num(r.r2)},
          {"pearson_r", num(r.pearson_r)}, {"n", r.n}};
}

/// One line per proposal: image_id,x,y,confidence
inline void write_predictions_csv(std::ostream& os, const std::string& image_id, const ProposalSet& props,
                                  bool header = true) {
  if (header) os << "image_id,x,y,confidence\n";
  char buf[128];
  for (const Proposal& p : props.proposals) {
    std::snprintf(buf, sizeof buf, ",%.3f,%.3f,%.6f\n", p.x, p.y, p.confidence);
    os << image_id << buf;
  }
}

// ---------------------------------------------------------------------------
// overlay

namespace detail {

// 3x5 glyphs, rows top to bottom, bit 2 = left column.
inline const unsigned char* glyph(char ch) {
  static const unsigned char digits[10][5] = {
      {7, 5, 5, 5, 7}, {2, 6, 2, 2, 7}, {7, 1, 7, 4, 7}, {7, 1, 7, 1, 7}, {5, 5, 7, 1, 1},
      {7, 4, 7, 1, 7}, {7, 4, 7, 5, 7}, {7, 1, 1, 1, 1}, {7, 5, 7, 5, 7}, {7, 5, 7, 1, 7}};
  static const unsigned char G[5] = {7, 4, 5, 5, 7}, T[5] = {7, 2, 2, 2, 2}, P[5] = {7, 5, 7, 4, 4},
                             R[5] = {6, 5, 6, 5, 5}, colon[5] = {0, 2, 0, 2, 0}, space[5] = {0, 0, 0, 0, 0};
  if (ch >= '0' && ch <= '9') return digits[ch - '0'];
  switch (ch) {
    case 'G': return G;
    case 'T': return T;
    case 'P': return P;
    case 'R': return R;
    case ':': return colon;
    default: return space;
  }
}

inline void set_pixel(Image& img, std::ptrdiff_t y, std::ptrdiff_t x, float r, float g, float b) {
  const auto h = static_cast<std::ptrdiff_t>(img.dim(1)), w = static_cast<std::ptrdiff_t>(img.dim(2));
  if (y < 0 || x < 0 || y >= h || x >= w) return;
  const std::size_t plane = img.dim(1) * img.dim(2), at = static_cast<std::size_t>(y * w + x);
  img[at] = r;
  img[plane + at] = g;
  img[2 * plane + at] = b;
}

inline void draw_disk(Image& img, const Point& c, double radius, float r, float g, float b) {
  const auto x0 = static_cast<std::ptrdiff_t>(std::floor(c.x - radius));
  const auto x1 = static_cast<std::ptrdiff_t>(std::ceil(c.x + radius));
  const auto y0 = static_cast<std::ptrdiff_t>(std::floor(c.y - radius));
  const auto y1 = static_cast<std::ptrdiff_t>(std::ceil(c.y + radius));
  for (std::ptrdiff_t y = y0; y <= y1; ++y)
    for (std::ptrdiff_t x = x0; x <= x1; ++x)
      if (std::hypot(static_cast<double>(x) - c.x, static_cast<double>(y) - c.y) <= radius) set_pixel(img, y, x, r, g, b);
}

}  // namespace detail

inline constexpr double kOverlayDotRadius = 3.0;

/// Stamps `text` (digits, "GTPR:" and spaces) at the top-left, white on black, 2x scale.
inline void stamp_text(Image& img, const std::string& text) {
  constexpr std::ptrdiff_t scale = 2, pad = 2;
  const auto width = static_cast<std::ptrdiff_t>(text.size()) * 4 * scale + pad;
  for (std::ptrdiff_t y = 0; y < 5 * scale + 2 * pad; ++y)
    for (std::ptrdiff_t x = 0; x < width + pad; ++x) detail::set_pixel(img, y, x, 0.f, 0.f, 0.f);
  for (std::size_t i = 0; i < text.size(); ++i) {
    const unsigned char* gl = detail::glyph(text[i]);
    for (std::ptrdiff_t row = 0; row < 5; ++row)
      for (std::ptrdiff_t col = 0; col < 3; ++col)
        if (gl[row] & (4 >> col))
          for (std::ptrdiff_t sy = 0; sy < scale; ++sy)
            for (std::ptrdiff_t sx = 0; sx < scale; ++sx)
              detail::set_pixel(img, pad + row * scale + sy, pad + (static_cast<std::ptrdiff_t>(i) * 4 + col) * scale + sx,
                                1.f, 1.f, 1.f);
  }
}

/// Ground truth in pure green, predictions in pure red (drawn last), counts in the corner.
inline Image render_overlay(const Image& image, const std::vector<Point>& gt, const std::vector<Point>& predicted) {
  Image out = image;
  for (const Point& p : gt) detail::draw_disk(out, p, kOverlayDotRadius, 0.f, 1.f, 0.f);
  for (const Point& p : predicted) detail::draw_disk(out, p, kOverlayDotRadius, 1.f, 0.f, 0.f);
  stamp_text(out, "GT:" + std::to_string(gt.size()) + " PR:" + std::to_string(predicted.size()));
  return out;
}

inline void render_overlay(const Image& image, const std::vector<Point>& gt, const std::vector<Point>& predicted,
                           const std::string& out_path) {
  write_png(out_path, render_overlay(image, gt, predicted));
}

inline std::vector<Point> proposal_points(const ProposalSet& ps) {
  std::vector<Point> pts;
  pts.reserve(ps.size());
  for (const Proposal& p : ps.proposals) pts.push_back({p.x, p.y});
  return pts;
}

}  // namespace soynet
