#pragma once

// One-to-one assignment of ground-truth points to proposals.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "soynet/errors.hpp"
#include "soynet/head.hpp"
#include "soynet/point.hpp"

namespace soynet {

struct MatchConfig {
  double tau = 5e-2;  // weight on pixel distance

  void validate() const {
    if (!(tau > 0.0)) throw ConfigError("match.tau must be > 0");
  }
};

/// Row-major N x M matrix; N may be zero.
struct CostMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  CostMatrix() = default;
  CostMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

struct Assignment {
  std::vector<std::size_t> column_of_row;  // sigma(i)
  double cost = 0.0;                       // sum over rows in index order
};

struct MatchResult {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (gt index, proposal index), by gt index
  std::vector<std::size_t> negatives;                      // ascending proposal indices
};

/// D[i][j] = tau * |p_i - phat_j| - c_j.
inline CostMatrix cost_matrix(const std::vector<Point>& gt, const ProposalSet& props, const MatchConfig& cfg) {
  CostMatrix d(gt.size(), props.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    for (std::size_t j = 0; j < props.size(); ++j) {
      const Proposal& p = props.proposals[j];
      d(i, j) = cfg.tau * std::hypot(gt[i].x - p.x, gt[i].y - p.y) - p.confidence;
    }
  }
  return d;
}

/// Minimum-cost injection rows -> columns (rows <= cols) by shortest augmenting
/// paths with dual potentials, O(N^2 M). Ties resolve to the lowest column index.
inline Assignment hungarian(const CostMatrix& d) {
  const std::size_t n = d.rows, m = d.cols;
  if (n > m) {
    throw InfeasibleError("assignment infeasible: " + std::to_string(n) + " ground-truth points but only " +
                          std::to_string(m) + " proposals; increase anchors per cell");
  }
  for (double v : d.data) {
    if (!std::isfinite(v)) throw NumericError("hungarian: non-finite cost entry");
  }
  Assignment out;
  out.column_of_row.assign(n, 0);
  if (n == 0) return out;

  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based with a virtual column 0, following the classic potentials formulation.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<std::size_t> match(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = d(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  for (std::size_t j = 1; j <= m; ++j)
    if (match[j] != 0) out.column_of_row[match[j] - 1] = j - 1;
  for (std::size_t i = 0; i < n; ++i) out.cost += d(i, out.column_of_row[i]);
  return out;
}

inline MatchResult match(const std::vector<Point>& gt, const ProposalSet& props, const MatchConfig& cfg) {
  const Assignment a = hungarian(cost_matrix(gt, props, cfg));
  MatchResult r;
  std::vector<char> taken(props.size(), 0);
  r.pairs.reserve(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    r.pairs.emplace_back(i, a.column_of_row[i]);
    taken[a.column_of_row[i]] = 1;
  }
  r.negatives.reserve(props.size() - gt.size());
  for (std::size_t j = 0; j < props.size(); ++j)
    if (!taken[j]) r.negatives.push_back(j);
  return r;
}

}  // namespace soynet
