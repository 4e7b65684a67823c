// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "pfp/common/rng.hpp"
#include "pfp/nn/model.hpp"

namespace pfp::nn {

struct GradCheckResult {
  double max_rel_err = 0.0;
  size_t params_checked = 0;
};

// Central finite differences against analytic gradients, in double precision.
// `loss_fn` must recompute the loss from the current parameter values.
// Checks a random subsample of at least `min_samples` parameters (all of them
// if the model is smaller). Relative error uses max(|analytic|, |numeric|,
// 1e-8) as denominator.
inline GradCheckResult grad_check(std::vector<NamedParam<double>> params,
                                  const std::vector<const Tensor<double>*>& analytic,
                                  const std::function<double()>& loss_fn, double eps,
                                  size_t min_samples = 200, uint64_t seed = 7) {
  if (eps <= 0.0) fail("nn.gradcheck_eps", "finite-difference step must be positive, got {}", eps);
  if (params.size() != analytic.size())
    fail("nn.gradcheck_args", "params ({}) and analytic grads ({}) differ", params.size(), analytic.size());

  // Flatten (tensor, element) coordinates.
  std::vector<std::pair<size_t, size_t>> coords;
  for (size_t p = 0; p < params.size(); ++p) {
    require_same_shape(*params[p].tensor, *analytic[p], "grad_check " + params[p].name);
    for (size_t i = 0; i < params[p].tensor->data.size(); ++i) coords.push_back({p, i});
  }
  Rng rng(seed);
  rng.shuffle(coords);
  const size_t n = std::min(coords.size(), std::max(min_samples, size_t(1)));

  GradCheckResult res;
  res.params_checked = n;
  for (size_t s = 0; s < n; ++s) {
    auto [p, i] = coords[s];
    double& slot = params[p].tensor->data[i];
    const double orig = slot;
    slot = orig + eps;
    const double up = loss_fn();
    slot = orig - eps;
    const double down = loss_fn();
    slot = orig;
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic[p]->data[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    res.max_rel_err = std::max(res.max_rel_err, std::abs(a - numeric) / denom);
  }
  return res;
}

}  // namespace pfp::nn
