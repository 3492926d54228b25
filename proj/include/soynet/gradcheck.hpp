#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "soynet/param.hpp"
#include "soynet/rng.hpp"

namespace soynet {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;  // flat index over all probed coordinates
  std::size_t probes = 0;
  bool finite = true;

  bool passed(double tol) const { return finite && max_rel_error < tol; }
};

/// Compares `analytic` against central finite differences of `f` at `x`.
/// Error per element is |ga - gfd| / max(1, |ga|, |gfd|). `x` is restored on return.
/// When max_probes < x.size(), a seeded random subset of coordinates is probed.
template <typename T, typename F>
GradCheckReport gradient_check(F&& f, std::span<T> x, std::span<const T> analytic, T eps,
                               std::size_t max_probes = std::numeric_limits<std::size_t>::max(),
                               std::uint64_t seed = 0) {
  GradCheckReport rep;
  std::vector<std::size_t> idx(x.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  if (max_probes < idx.size()) {
    Rng rng(seed);
    rng.shuffle(idx);
    idx.resize(max_probes);
    std::sort(idx.begin(), idx.end());
  }
  for (std::size_t i : idx) {
    const T orig = x[i];
    x[i] = orig + eps;
    const double fp = static_cast<double>(f());
    x[i] = orig - eps;
    const double fm = static_cast<double>(f());
    x[i] = orig;
    ++rep.probes;
    if (!std::isfinite(fp) || !std::isfinite(fm) || !std::isfinite(static_cast<double>(analytic[i]))) {
      rep.finite = false;
      rep.worst_index = i;
      rep.max_rel_error = std::numeric_limits<double>::infinity();
      return rep;
    }
    const double fd = (fp - fm) / (2.0 * static_cast<double>(eps));
    const double ga = static_cast<double>(analytic[i]);
    const double err = std::abs(ga - fd) / std::max({1.0, std::abs(ga), std::abs(fd)});
    if (err > rep.max_rel_error) {
      rep.max_rel_error = err;
      rep.worst_index = i;
    }
  }
  return rep;
}

/// Checks every tensor in `params` (values perturbed in place, grads read as analytic).
template <typename T, typename F>
GradCheckReport gradient_check(F&& f, const ParamList<T>& params, T eps,
                               std::size_t max_probes_per_param =
                                   std::numeric_limits<std::size_t>::max(),
                               std::uint64_t seed = 0) {
  GradCheckReport total;
  std::size_t offset = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Param<T>& p = *params[k];
    const GradCheckReport r = gradient_check(f, p.value.values(), std::span<const T>(p.grad.values()),
                                             eps, max_probes_per_param, mix_seed(seed, k));
    total.probes += r.probes;
    if (!r.finite) {
      total.finite = false;
      total.max_rel_error = r.max_rel_error;
      total.worst_index = offset + r.worst_index;
      return total;
    }
    if (r.max_rel_error > total.max_rel_error) {
      total.max_rel_error = r.max_rel_error;
      total.worst_index = offset + r.worst_index;
    }
    offset += p.size();
  }
  return total;
}

}  // namespace soynet
