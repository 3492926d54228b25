#pragma once

// Synthetic dot scenes: bright anti-aliased ellipses on a textured background.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "soynet/data.hpp"
#include "soynet/rng.hpp"

namespace soynet {

struct SynthConfig {
  std::size_t count = 1;
  std::size_t pods_min = 20;
  std::size_t pods_max = 80;
  double radius_min = 2.5;
  double radius_max = 4.0;
  std::size_t width = kCropSize;
  std::size_t height = kCropSize;
  double texture = 1.0;  // 0 gives a flat background
  std::uint64_t seed = 0;

  void validate() const {
    if (pods_max < pods_min) throw ConfigError("pods_max must be >= pods_min");
    if (!(radius_min > 0.0) || radius_max < radius_min) throw ConfigError("invalid blob radius range");
    if (width < 16 || height < 16) throw ConfigError("synthetic images must be at least 16x16");
    if (2.0 * (radius_max + 1.0) >= static_cast<double>(std::min(width, height))) {
      throw ConfigError("blob radius too large for the image");
    }
  }
};

namespace detail {

inline void render_background(Image& img, Rng& rng, double texture) {
  const std::size_t h = img.dim(1), w = img.dim(2);
  const std::array<double, 3> base{0.20 + 0.06 * rng.uniform(), 0.34 + 0.08 * rng.uniform(), 0.14 + 0.05 * rng.uniform()};
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::array<Wave, 4> waves;
  for (auto& wv : waves) {
    wv = {rng.uniform(-0.08, 0.08), rng.uniform(-0.08, 0.08), rng.uniform(0.0, 6.283185307179586),
          rng.uniform(0.02, 0.06)};
  }
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double t = 0.0;
      for (const auto& wv : waves) t += wv.amp * std::sin(wv.fx * static_cast<double>(x) + wv.fy * static_cast<double>(y) + wv.phase);
      const double noise = rng.uniform(-0.03, 0.03);
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = base[c] + texture * (t * (c == 1 ? 1.0 : 0.7) + noise);
        img[(c * h + y) * w + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
}

/// Composites one rotated ellipse centred at (cx, cy) with semi-axes (a, b).
inline void render_blob(Image& img, double cx, double cy, double a, double b, double angle,
                        const std::array<double, 3>& color) {
  const std::size_t h = img.dim(1), w = img.dim(2);
  const double ca = std::cos(angle), sa = std::sin(angle);
  const double reach = std::max(a, b) + 1.0;
  const auto y0 = static_cast<std::ptrdiff_t>(std::floor(cy - reach));
  const auto y1 = static_cast<std::ptrdiff_t>(std::ceil(cy + reach));
  const auto x0 = static_cast<std::ptrdiff_t>(std::floor(cx - reach));
  const auto x1 = static_cast<std::ptrdiff_t>(std::ceil(cx + reach));
  const double soft = std::min(a, b);
  for (std::ptrdiff_t y = std::max<std::ptrdiff_t>(0, y0); y <= std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(h) - 1, y1); ++y) {
    for (std::ptrdiff_t x = std::max<std::ptrdiff_t>(0, x0); x <= std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(w) - 1, x1); ++x) {
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      const double u = (ca * dx + sa * dy) / a, v = (-sa * dx + ca * dy) / b;
      const double d = std::sqrt(u * u + v * v);
      const double alpha = std::clamp((1.0 - d) * soft + 0.5, 0.0, 1.0);
      if (alpha <= 0.0) continue;
      // Radial shading keeps the brightness peak on the centre.
      const double shade = 1.0 - 0.25 * std::min(d, 1.0);
      for (std::size_t c = 0; c < 3; ++c) {
        float& px = img[(c * h + static_cast<std::size_t>(y)) * w + static_cast<std::size_t>(x)];
        px = static_cast<float>((1.0 - alpha) * px + alpha * color[c] * shade);
      }
    }
  }
}

}  // namespace detail

/// Renders one scene with `pods` blobs; the ground truth is the blob centres.
inline AnnotatedImage synth_scene(const SynthConfig& cfg, std::size_t pods, Rng& rng, std::string id) {
  AnnotatedImage item;
  item.id = std::move(id);
  item.image = Image({3, cfg.height, cfg.width});
  detail::render_background(item.image, rng, cfg.texture);
  const double margin = cfg.radius_max + 1.0;
  const double min_sep = 1.5 * cfg.radius_max;
  for (std::size_t k = 0; k < pods; ++k) {
    Point p;
    for (int attempt = 0; attempt < 200; ++attempt) {
      p = {rng.uniform(margin, static_cast<double>(cfg.width) - margin),
           rng.uniform(margin, static_cast<double>(cfg.height) - margin)};
      const bool clear = std::none_of(item.points.begin(), item.points.end(), [&](const Point& q) {
        return std::hypot(p.x - q.x, p.y - q.y) < min_sep;
      });
      if (clear) break;
    }
    const double a = rng.uniform(cfg.radius_min, cfg.radius_max);
    const double b = a * rng.uniform(0.6, 1.0);
    const double angle = rng.uniform(0.0, 3.141592653589793);
    const std::array<double, 3> color{0.85 + 0.1 * rng.uniform(), 0.78 + 0.1 * rng.uniform(), 0.40 + 0.15 * rng.uniform()};
    detail::render_blob(item.image, p.x, p.y, a, b, angle, color);
    item.points.push_back(p);
  }
  return item;
}

/// `count` scenes, item i drawn from its own stream derived from (seed, i).
inline std::vector<AnnotatedImage> synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<AnnotatedImage> out;
  out.reserve(cfg.count);
  for (std::size_t i = 0; i < cfg.count; ++i) {
    Rng rng(mix_seed(cfg.seed, i, 0x5e4d));
    const auto pods = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(cfg.pods_min),
                                                           static_cast<std::int64_t>(cfg.pods_max)));
    char id[32];
    std::snprintf(id, sizeof id, "synth_%05zu", i);
    out.push_back(synth_scene(cfg, pods, rng, id));
  }
  return out;
}

}  // namespace soynet
