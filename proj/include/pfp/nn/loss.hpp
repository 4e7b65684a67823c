// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <span>

#include "pfp/nn/tensor.hpp"

namespace pfp::nn {

template <typename S>
struct LossResult {
  double loss = 0.0;        // mean over the batch
  Tensor<S> grad_logits;    // d(mean loss)/d(logits)
};

// Numerically stabilized softmax cross entropy. Probability rows sum to 1
// within 1e-6; the returned gradient is (softmax - onehot)/B.
template <typename S>
LossResult<S> softmax_cross_entropy(const Tensor<S>& logits, std::span<const int32_t> labels) {
  if (logits.shape.size() != 2) fail("nn.shape_mismatch", "softmax_cross_entropy expects [B,K] logits");
  const int64_t B = logits.shape[0], K = logits.shape[1];
  if (static_cast<int64_t>(labels.size()) != B)
    fail("nn.shape_mismatch", "softmax_cross_entropy: {} labels for batch of {}", labels.size(), B);

  LossResult<S> out;
  out.grad_logits = Tensor<S>({B, K});
  double total = 0.0;
  for (int64_t b = 0; b < B; ++b) {
    const int32_t y = labels[b];
    if (y < 0 || y >= K) fail("nn.bad_label", "label {} out of range [0,{})", y, K);
    const S* row = &logits.data[b * K];
    S m = row[0];
    for (int64_t k = 1; k < K; ++k) m = std::max(m, row[k]);
    double denom = 0.0;
    for (int64_t k = 0; k < K; ++k) denom += std::exp(static_cast<double>(row[k] - m));
    const double log_denom = std::log(denom);
    total += log_denom - static_cast<double>(row[y] - m);
    S* g = &out.grad_logits.data[b * K];
    for (int64_t k = 0; k < K; ++k) {
      double p = std::exp(static_cast<double>(row[k] - m)) / denom;
      g[k] = static_cast<S>((p - (k == y ? 1.0 : 0.0)) / static_cast<double>(B));
    }
  }
  out.loss = total / static_cast<double>(B);
  if (!std::isfinite(out.loss)) fail("nn.non_finite", "non-finite loss");
  return out;
}

// Softmax probabilities only (for inspection/tests).
template <typename S>
Tensor<S> softmax(const Tensor<S>& logits) {
  const int64_t B = logits.shape[0], K = logits.shape[1];
  Tensor<S> p(logits.shape);
  for (int64_t b = 0; b < B; ++b) {
    const S* row = &logits.data[b * K];
    S m = row[0];
    for (int64_t k = 1; k < K; ++k) m = std::max(m, row[k]);
    double denom = 0.0;
    for (int64_t k = 0; k < K; ++k) denom += std::exp(static_cast<double>(row[k] - m));
    for (int64_t k = 0; k < K; ++k)
      p.data[b * K + k] = static_cast<S>(std::exp(static_cast<double>(row[k] - m)) / denom);
  }
  return p;
}

// Lowest index wins ties, so predictions are deterministic.
template <typename S>
int32_t argmax_row(const Tensor<S>& t, int64_t row) {
  const int64_t K = t.shape[1];
  const S* r = &t.data[row * K];
  int64_t best = 0;
  for (int64_t k = 1; k < K; ++k)
    if (r[k] > r[best]) best = k;
  return static_cast<int32_t>(best);
}

}  // namespace pfp::nn
