#pragma once

// Dot-annotated images: Labelme point-JSON ingestion, dataset split and augmentation.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "soynet/errors.hpp"
#include "soynet/image_io.hpp"
#include "soynet/point.hpp"
#include "soynet/rng.hpp"

namespace soynet {

inline constexpr std::size_t kCropSize = 224;

struct AnnotatedImage {
  Image image;  // [3 x H x W], values in [0, 1]
  std::vector<Point> points;
  std::string id;

  std::size_t height() const { return image.dim(1); }
  std::size_t width() const { return image.dim(2); }
};

/// Contents of one annotation file, before the image itself is loaded.
struct AnnotationMeta {
  std::string image_path;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<Point> points;
};

/// Parses the Labelme point-shape subset. Unknown fields are ignored.
inline AnnotationMeta parse_annotations(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("annotation is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("annotation root must be an object");
  const auto field = [&](const nlohmann::json& obj, const char* name) -> const nlohmann::json& {
    auto it = obj.find(name);
    if (it == obj.end()) throw ParseError(std::string("missing field '") + name + "'");
    return *it;
  };
  AnnotationMeta meta;
  const auto& path = field(doc, "imagePath");
  if (!path.is_string()) throw ParseError("field 'imagePath' must be a string");
  meta.image_path = path.get<std::string>();
  const auto extent = [&](const char* name) {
    const auto& v = field(doc, name);
    if (!v.is_number() || v.get<double>() < 1.0) throw ParseError(std::string("field '") + name + "' must be a positive number");
    return static_cast<std::size_t>(v.get<double>());
  };
  meta.width = extent("imageWidth");
  meta.height = extent("imageHeight");
  const auto& shapes = field(doc, "shapes");
  if (!shapes.is_array()) throw ParseError("field 'shapes' must be an array");
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto& s = shapes[i];
    const std::string where = "shapes[" + std::to_string(i) + "]";
    if (!s.is_object()) throw ParseError(where + " must be an object");
    auto st = s.find("shape_type");
    if (st == s.end()) throw ParseError("missing field '" + where + ".shape_type'");
    if (!st->is_string() || st->get<std::string>() != "point") {
      throw ValidationError(where + ": only shape_type \"point\" is supported");
    }
    auto pts = s.find("points");
    if (pts == s.end()) throw ParseError("missing field '" + where + ".points'");
    if (!pts->is_array() || pts->size() != 1 || !(*pts)[0].is_array() || (*pts)[0].size() != 2 ||
        !(*pts)[0][0].is_number() || !(*pts)[0][1].is_number()) {
      throw ParseError("field '" + where + ".points' must be [[x, y]]");
    }
    const Point p{(*pts)[0][0].get<double>(), (*pts)[0][1].get<double>()};
    if (!(p.x >= 0.0 && p.x < static_cast<double>(meta.width) && p.y >= 0.0 &&
          p.y < static_cast<double>(meta.height))) {
      std::ostringstream os;
      os << "point " << i << " (" << p.x << ", " << p.y << ") lies outside the " << meta.width << "x"
         << meta.height << " image";
      throw ValidationError(os.str());
    }
    meta.points.push_back(p);
  }
  return meta;
}

/// Serializes points in the same Labelme subset (label "pod").
inline std::string write_annotations(const AnnotationMeta& meta) {
  nlohmann::json shapes = nlohmann::json::array();
  for (const Point& p : meta.points) {
    shapes.push_back({{"label", "pod"},
                      {"points", nlohmann::json::array({nlohmann::json::array({p.x, p.y})})},
                      {"group_id", nullptr},
                      {"shape_type", "point"},
                      {"flags", nlohmann::json::object()}});
  }
  nlohmann::json doc = {{"version", "5.0.1"},
                        {"flags", nlohmann::json::object()},
                        {"shapes", shapes},
                        {"imagePath", meta.image_path},
                        {"imageData", nullptr},
                        {"imageHeight", meta.height},
                        {"imageWidth", meta.width}};
  return doc.dump(2) + "\n";
}

inline std::string read_text_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read '" + p.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Loads one annotation file and the image it references (relative to the JSON file).
inline AnnotatedImage load_annotated(const std::filesystem::path& json_path) {
  const AnnotationMeta meta = parse_annotations(read_text_file(json_path));
  AnnotatedImage item;
  item.image = read_image((json_path.parent_path() / meta.image_path).string());
  if (item.height() != meta.height || item.width() != meta.width) {
    throw ValidationError(json_path.string() + ": image extents disagree with imageWidth/imageHeight");
  }
  item.points = meta.points;
  item.id = json_path.stem().string();
  return item;
}

/// Annotation files (*.json) in a directory, sorted by name.
inline std::vector<std::filesystem::path> list_annotations(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

// ---------------------------------------------------------------------------

struct SplitSpec {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
  std::uint64_t seed = 0;

  void validate() const {
    for (double r : {train, val, test})
      if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("split ratios must lie in [0, 1]");
    if (std::abs(train + val + test - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  }
};

struct DatasetSplit {
  std::vector<std::string> train, val, test;
};

/// Seeded shuffle, then floor(n*val) and floor(n*test) items; the remainder goes to train.
inline DatasetSplit split_dataset(const std::vector<std::string>& ids, const SplitSpec& spec) {
  spec.validate();
  if (std::set<std::string>(ids.begin(), ids.end()).size() != ids.size()) {
    throw ValidationError("split_dataset: duplicate ids");
  }
  std::vector<std::string> order = ids;
  std::sort(order.begin(), order.end());
  Rng rng(spec.seed);
  rng.shuffle(order);
  const std::size_t n = order.size();
  // Small epsilon so that e.g. 0.15 * 100 does not floor to 14.
  const auto n_val = static_cast<std::size_t>(std::floor(spec.val * static_cast<double>(n) + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(spec.test * static_cast<double>(n) + 1e-9));
  DatasetSplit s;
  s.val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val),
                order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), order.end());
  return s;
}

// ---------------------------------------------------------------------------

/// Bilinear resize where output pixel u samples the source at u / scale
/// (so a point at x maps to x * scale).
inline Image resize_bilinear(const Image& img, std::size_t out_h, std::size_t out_w, double scale_y, double scale_x) {
  const std::size_t h = img.dim(1), w = img.dim(2);
  Image out({3, out_h, out_w});
  std::vector<std::size_t> x0(out_w), x1(out_w);
  std::vector<float> fx(out_w);
  for (std::size_t u = 0; u < out_w; ++u) {
    const double sx = std::clamp(static_cast<double>(u) / scale_x, 0.0, static_cast<double>(w - 1));
    x0[u] = static_cast<std::size_t>(sx);
    x1[u] = std::min(x0[u] + 1, w - 1);
    fx[u] = static_cast<float>(sx - static_cast<double>(x0[u]));
  }
  for (std::size_t v = 0; v < out_h; ++v) {
    const double sy = std::clamp(static_cast<double>(v) / scale_y, 0.0, static_cast<double>(h - 1));
    const auto y0 = static_cast<std::size_t>(sy);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const auto fy = static_cast<float>(sy - static_cast<double>(y0));
    for (std::size_t c = 0; c < 3; ++c) {
      const float* r0 = img.data() + (c * h + y0) * w;
      const float* r1 = img.data() + (c * h + y1) * w;
      float* o = out.data() + (c * out_h + v) * out_w;
      for (std::size_t u = 0; u < out_w; ++u) {
        const float top = r0[x0[u]] + fx[u] * (r0[x1[u]] - r0[x0[u]]);
        const float bot = r1[x0[u]] + fx[u] * (r1[x1[u]] - r1[x0[u]]);
        o[u] = top + fy * (bot - top);
      }
    }
  }
  return out;
}

struct AugmentConfig {
  double scale_min = 0.7;
  double scale_max = 1.3;
  double flip_probability = 0.5;
  std::size_t crop = kCropSize;
};

/// The random choices behind one augmentation, exposed for testing.
struct AugmentPlan {
  double scale = 1.0;
  std::size_t scaled_h = 0, scaled_w = 0;
  std::size_t crop_x = 0, crop_y = 0;
  bool flip = false;
};

inline AugmentPlan plan_augment(std::size_t h, std::size_t w, Rng& rng, const AugmentConfig& cfg = {}) {
  const double min_side = static_cast<double>(std::min(h, w));
  // Raise the lower bound so the shorter side never drops below the crop size.
  const double lo = std::max(cfg.scale_min, static_cast<double>(cfg.crop) / min_side);
  const double hi = std::max(lo, cfg.scale_max);
  AugmentPlan p;
  p.scale = rng.uniform(lo, hi);
  p.scaled_h = std::max(cfg.crop, static_cast<std::size_t>(std::floor(static_cast<double>(h) * p.scale)));
  p.scaled_w = std::max(cfg.crop, static_cast<std::size_t>(std::floor(static_cast<double>(w) * p.scale)));
  p.crop_y = static_cast<std::size_t>(rng.below(p.scaled_h - cfg.crop + 1));
  p.crop_x = static_cast<std::size_t>(rng.below(p.scaled_w - cfg.crop + 1));
  p.flip = rng.bernoulli(cfg.flip_probability);
  return p;
}

/// Scale, crop the half-open window [x0, x0+crop) x [y0, y0+crop), optionally mirror.
/// Points map as x -> x*s - x0, then x -> (crop-1) - x when flipped.
inline AnnotatedImage apply_augment(const AnnotatedImage& item, const AugmentPlan& p, std::size_t crop = kCropSize) {
  const Image scaled = resize_bilinear(item.image, p.scaled_h, p.scaled_w, p.scale, p.scale);
  AnnotatedImage out;
  out.id = item.id;
  out.image = Image({3, crop, crop});
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < crop; ++y) {
      const float* src = scaled.data() + (c * p.scaled_h + p.crop_y + y) * p.scaled_w + p.crop_x;
      float* dst = out.image.data() + (c * crop + y) * crop;
      if (p.flip) {
        for (std::size_t x = 0; x < crop; ++x) dst[x] = src[crop - 1 - x];
      } else {
        std::copy_n(src, crop, dst);
      }
    }
  }
  const double lim = static_cast<double>(crop);
  for (const Point& pt : item.points) {
    double x = pt.x * p.scale - static_cast<double>(p.crop_x);
    const double y = pt.y * p.scale - static_cast<double>(p.crop_y);
    if (!(x >= 0.0 && x < lim && y >= 0.0 && y < lim)) continue;
    // A point in the last half pixel would mirror to a negative coordinate.
    if (p.flip) x = std::max(0.0, lim - 1.0 - x);
    out.points.push_back({x, y});
  }
  return out;
}

inline AnnotatedImage augment(const AnnotatedImage& item, Rng& rng, const AugmentConfig& cfg = {}) {
  return apply_augment(item, plan_augment(item.height(), item.width(), rng, cfg), cfg.crop);
}

}  // namespace soynet
