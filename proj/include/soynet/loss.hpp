#pragma once

// Localization + classification objective over a one-to-one match.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "soynet/errors.hpp"
#include "soynet/head.hpp"
#include "soynet/matcher.hpp"
#include "soynet/point.hpp"
#include "soynet/tensor.hpp"

namespace soynet {

inline constexpr double kLogClamp = 1e-7;

struct LossConfig {
  double lambda1 = 2e-4;  // weight of the background (unmatched) term
  double lambda2 = 0.5;   // weight of the classification loss

  void validate() const {
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ConfigError("loss weights must be >= 0");
  }
};

struct LossReport {
  double loc = 0.0;
  double cls = 0.0;
  double total = 0.0;
};

/// Mean squared Euclidean distance over matched (gt, predicted) pairs; 0 when empty.
inline double loc_loss(std::span<const std::pair<Point, Point>> pairs) {
  if (pairs.empty()) return 0.0;
  double s = 0.0;
  for (const auto& [g, p] : pairs) s += (g.x - p.x) * (g.x - p.x) + (g.y - p.y) * (g.y - p.y);
  return s / static_cast<double>(pairs.size());
}

/// Negative log-likelihood form: -(1/M) { sum_pos log c + lambda1 sum_neg log(1 - c) },
/// confidences clamped to [1e-7, 1 - 1e-7].
inline double cls_loss(std::span<const double> confidences, std::span<const std::size_t> positives,
                       const LossConfig& cfg) {
  const std::size_t m = confidences.size();
  if (m == 0) return 0.0;
  std::vector<char> pos(m, 0);
  for (std::size_t j : positives) pos.at(j) = 1;
  double sp = 0.0, sn = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double c = std::clamp(confidences[j], kLogClamp, 1.0 - kLogClamp);
    if (pos[j]) sp += std::log(c);
    else sn += std::log(1.0 - c);
  }
  return -(sp + cfg.lambda1 * sn) / static_cast<double>(m);
}

inline double total_loss(double loc, double cls, const LossConfig& cfg) { return loc + cfg.lambda2 * cls; }

template <typename T>
struct LossGrads {
  LossReport report;
  Tensor<T> d_offsets;  // same shape as HeadOutput::offsets
  Tensor<T> d_logits;   // same shape as HeadOutput::logits
};

/// Evaluates the objective for one image and its gradients w.r.t. the head outputs.
/// `scale` multiplies the gradients (e.g. 1/batch).
template <typename T>
LossGrads<T> loss_with_grads(const std::vector<Point>& gt, const HeadOutput<T>& head, const ProposalSet& props,
                             const MatchResult& m, const LossConfig& cfg, double scale = 1.0) {
  const std::size_t n = gt.size(), total = props.size();
  LossGrads<T> out{{}, Tensor<T>(head.offsets.shape()), Tensor<T>(head.logits.shape())};

  std::vector<std::pair<Point, Point>> pairs;
  pairs.reserve(n);
  for (const auto& [i, j] : m.pairs) pairs.push_back({gt[i], {props.proposals[j].x, props.proposals[j].y}});
  out.report.loc = loc_loss(pairs);

  std::vector<double> conf(total);
  for (std::size_t j = 0; j < total; ++j) conf[j] = static_cast<double>(head.confidences[j]);
  std::vector<std::size_t> positives;
  positives.reserve(n);
  for (const auto& pr : m.pairs) positives.push_back(pr.second);
  out.report.cls = cls_loss(conf, positives, cfg);
  out.report.total = total_loss(out.report.loc, out.report.cls, cfg);
  if (!std::isfinite(out.report.total)) throw NumericError("non-finite loss");

  // d loc / d proposal = 2 (phat - p) / N; proposal = anchor + offset.
  if (n > 0) {
    const double k = 2.0 / static_cast<double>(n) * scale;
    for (const auto& [i, j] : m.pairs) {
      out.d_offsets[2 * j] += static_cast<T>(k * (props.proposals[j].x - gt[i].x));
      out.d_offsets[2 * j + 1] += static_cast<T>(k * (props.proposals[j].y - gt[i].y));
    }
  }
  // d cls / d c, then through the two-class softmax: dc/dz_pod = c(1-c) = -dc/dz_bg.
  std::vector<char> pos(total, 0);
  for (std::size_t j : positives) pos[j] = 1;
  const double w = cfg.lambda2 * scale / static_cast<double>(total);
  for (std::size_t j = 0; j < total; ++j) {
    const double c = conf[j];
    if (c <= kLogClamp || c >= 1.0 - kLogClamp) continue;  // clamped: flat
    const double dldc = pos[j] ? -w / c : w * cfg.lambda1 / (1.0 - c);
    const double dz = dldc * c * (1.0 - c);
    out.d_logits[2 * j + 1] += static_cast<T>(dz);
    out.d_logits[2 * j] -= static_cast<T>(dz);
  }
  return out;
}

}  // namespace soynet
