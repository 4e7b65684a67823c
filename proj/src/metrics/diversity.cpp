// SPDX-License-Identifier: Apache-2.0
#include "pfp/metrics/diversity.hpp"

#include <algorithm>
#include <cmath>

#include "pfp/common/error.hpp"

namespace pfp::metrics {

double action_entropy(std::span<const uint64_t> counts) {
  uint64_t total = 0;
  for (uint64_t c : counts) total += c;
  if (total == 0) fail("metrics.empty_actions", "action entropy of an all-zero count table");
  double h = 0.0;
  for (uint64_t c : counts) {
    if (c == 0) continue;
    double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return std::max(h, 0.0);
}

double coverage(const std::set<std::string>& visited, const std::set<std::string>& all) {
  if (all.empty()) fail("metrics.empty_states", "coverage against an empty state set");
  for (const std::string& v : visited)
    if (!all.contains(v))
      fail("metrics.coverage_subset", "visited state '{}' is not in the site's state set", v);
  return static_cast<double>(visited.size()) / static_cast<double>(all.size());
}

double d_act(double entropy_nats, size_t action_count, double mean_coverage, double alpha) {
  if (action_count < 2) fail("metrics.bad_action_count", "entropy normalization needs |A| >= 2");
  if (alpha < 0.0 || alpha > 1.0) fail("metrics.bad_alpha", "alpha must be in [0,1], got {}", alpha);
  double normalized = entropy_nats / std::log(static_cast<double>(action_count));
  return alpha * normalized + (1.0 - alpha) * mean_coverage;
}

double d_pkt(std::span<const double> flat, size_t dim) {
  if (dim == 0 || flat.empty() || flat.size() % dim != 0)
    fail("metrics.dim_mismatch", "embedding buffer of {} values is not a multiple of dim {}", flat.size(), dim);
  const size_t n = flat.size() / dim;
  std::vector<double> mean(dim, 0.0);
  for (size_t i = 0; i < n; ++i)
    for (size_t d = 0; d < dim; ++d) mean[d] += flat[i * dim + d];
  for (double& m : mean) m /= static_cast<double>(n);
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (size_t d = 0; d < dim; ++d) {
      double diff = flat[i * dim + d] - mean[d];
      sq += diff * diff;
    }
    total += sq;
  }
  return total / static_cast<double>(n);
}

}  // namespace pfp::metrics
