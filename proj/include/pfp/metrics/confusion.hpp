// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pfp::metrics {

// K x K integer count matrix; rows are ground truth, columns predictions.
// Merging across evaluation shards is plain integer addition, so sharded
// evaluation is order-independent.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::vector<std::string> labels);

  static ConfusionMatrix from_pairs(std::vector<std::string> labels, std::span<const int32_t> preds,
                                    std::span<const int32_t> truths);

  void add(size_t truth, size_t pred, uint64_t n = 1);
  void merge(const ConfusionMatrix& other);

  size_t k() const { return labels_.size(); }
  uint64_t total() const { return total_; }
  uint64_t count(size_t truth, size_t pred) const { return counts_[truth * k() + pred]; }
  const std::vector<std::string>& labels() const { return labels_; }

  uint64_t row_sum(size_t truth) const;
  uint64_t col_sum(size_t pred) const;

 private:
  std::vector<std::string> labels_;
  std::vector<uint64_t> counts_;
  uint64_t total_ = 0;
};

// 100 * trace / total.
double accuracy_pct(const ConfusionMatrix& cm);

// Mean per-class F1 over the full label space, as a percentage. A class with
// P + R == 0 contributes F1 = 0.
double macro_f1_pct(const ConfusionMatrix& cm);

// Half-away-from-zero rounding to one decimal, the presentation rule for all
// reported percentages.
double round1(double pct);

}  // namespace pfp::metrics
