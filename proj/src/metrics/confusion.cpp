// SPDX-License-Identifier: Apache-2.0
#include "pfp/metrics/confusion.hpp"

#include <cmath>

#include "pfp/common/error.hpp"

namespace pfp::metrics {

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.empty()) fail("metrics.empty_labels", "confusion matrix needs at least one class");
  counts_.assign(labels_.size() * labels_.size(), 0);
}

ConfusionMatrix ConfusionMatrix::from_pairs(std::vector<std::string> labels, std::span<const int32_t> preds,
                                            std::span<const int32_t> truths) {
  if (preds.size() != truths.size())
    fail("metrics.length_mismatch", "{} predictions vs {} truths", preds.size(), truths.size());
  ConfusionMatrix cm(std::move(labels));
  for (size_t i = 0; i < preds.size(); ++i) {
    if (truths[i] < 0 || static_cast<size_t>(truths[i]) >= cm.k() || preds[i] < 0 ||
        static_cast<size_t>(preds[i]) >= cm.k())
      fail("metrics.bad_index", "class index out of range at pair {}", i);
    cm.add(static_cast<size_t>(truths[i]), static_cast<size_t>(preds[i]));
  }
  return cm;
}

void ConfusionMatrix::add(size_t truth, size_t pred, uint64_t n) {
  if (truth >= k() || pred >= k()) fail("metrics.bad_index", "class index out of range");
  counts_[truth * k() + pred] += n;
  total_ += n;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.labels_ != labels_) fail("metrics.label_mismatch", "cannot merge confusion matrices over different labels");
  for (size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  total_ += other.total_;
}

uint64_t ConfusionMatrix::row_sum(size_t truth) const {
  uint64_t s = 0;
  for (size_t p = 0; p < k(); ++p) s += count(truth, p);
  return s;
}

uint64_t ConfusionMatrix::col_sum(size_t pred) const {
  uint64_t s = 0;
  for (size_t t = 0; t < k(); ++t) s += count(t, pred);
  return s;
}

double accuracy_pct(const ConfusionMatrix& cm) {
  if (cm.total() == 0) fail("metrics.empty", "cannot compute accuracy of an empty confusion matrix");
  uint64_t diag = 0;
  for (size_t i = 0; i < cm.k(); ++i) diag += cm.count(i, i);
  return 100.0 * static_cast<double>(diag) / static_cast<double>(cm.total());
}

double macro_f1_pct(const ConfusionMatrix& cm) {
  if (cm.total() == 0) fail("metrics.empty", "cannot compute macro-F1 of an empty confusion matrix");
  double sum_f1 = 0.0;
  for (size_t c = 0; c < cm.k(); ++c) {
    const double tp = static_cast<double>(cm.count(c, c));
    const double row = static_cast<double>(cm.row_sum(c));
    const double col = static_cast<double>(cm.col_sum(c));
    const double precision = col > 0 ? tp / col : 0.0;
    const double recall = row > 0 ? tp / row : 0.0;
    const double f1 = (precision + recall) > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    sum_f1 += f1;
  }
  return 100.0 * sum_f1 / static_cast<double>(cm.k());
}

double round1(double pct) { return std::round(pct * 10.0) / 10.0; }

}  // namespace pfp::metrics
