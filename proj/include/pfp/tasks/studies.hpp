// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "pfp/tasks/train.hpp"

namespace pfp::tasks {

struct SweepPoint {
  double lambda = 0.0;
  double site_acc = 0.0;     // median test accuracy over seeds
  double persona_acc = 0.0;  // median test accuracy over seeds
};

// One joint run per (lambda, seed); seeds are base_seed + run index. Lambdas
// must be non-empty, ascending, and duplicate-free.
std::vector<SweepPoint> run_lambda_sweep(const LoadedDataset& ds, std::span<const double> lambdas,
                                         int64_t seed_count, Openness openness, const TrainConfig& base,
                                         int64_t jobs = 1);

struct ScalingPoint {
  int64_t budget = 0;
  double mean_acc = 0.0;
  double std_acc = 0.0;  // population standard deviation over seeds
  double min_acc = 0.0;
  double max_acc = 0.0;
};

// Mixed-site open-world persona models trained on `budget` windows per
// persona class (deterministic stratified subsample), evaluated on the full
// test split; mean/std/min/max over seeds.
std::vector<ScalingPoint> run_scaling_study(const LoadedDataset& ds, std::span<const int64_t> budgets,
                                            int64_t seed_count, const TrainConfig& base, int64_t jobs = 1);

// Deterministic per-persona subsample of the train split. Errors if any
// persona class has fewer than `budget` windows, naming the shortfall.
std::vector<int64_t> subsample_per_persona(const LoadedDataset& ds, int64_t budget, uint64_t seed);

}  // namespace pfp::tasks
