// SPDX-License-Identifier: Apache-2.0
#include "pfp/metrics/openworld.hpp"

#include <algorithm>

#include "pfp/common/error.hpp"

namespace pfp::metrics {

OwReport ow_report(const ConfusionMatrix& cm) {
  if (cm.k() < 2) fail("metrics.no_ow", "confusion matrix too small to carry an OW class");
  const size_t ow = cm.k() - 1;
  const uint64_t row = cm.row_sum(ow);
  if (row == 0) fail("metrics.ow_row_empty", "no true-OW samples in the confusion matrix");
  const uint64_t col = cm.col_sum(ow);
  const uint64_t tp = cm.count(ow, ow);

  OwReport r;
  r.ow_recall = 100.0 * static_cast<double>(tp) / static_cast<double>(row);
  r.ow_precision = col > 0 ? 100.0 * static_cast<double>(tp) / static_cast<double>(col) : 0.0;
  r.ow_f1 = (r.ow_precision + r.ow_recall) > 0
                ? 2.0 * r.ow_precision * r.ow_recall / (r.ow_precision + r.ow_recall)
                : 0.0;
  r.misattr_at_ow = 100.0 - r.ow_recall;

  const uint64_t misattributed = row - tp;
  if (misattributed == 0) {
    r.top3_share = 0.0;
    return r;
  }
  std::vector<size_t> order(ow);
  for (size_t c = 0; c < ow; ++c) order[c] = c;
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return cm.count(ow, a) > cm.count(ow, b); });
  uint64_t top3 = 0;
  for (size_t i = 0; i < order.size() && i < 3; ++i) {
    top3 += cm.count(ow, order[i]);
    if (cm.count(ow, order[i]) > 0) r.top3_personas.push_back(cm.labels()[order[i]]);
  }
  r.top3_share = 100.0 * static_cast<double>(top3) / static_cast<double>(misattributed);
  return r;
}

}  // namespace pfp::metrics
