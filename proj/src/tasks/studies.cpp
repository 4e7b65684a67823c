// SPDX-License-Identifier: Apache-2.0
#include "pfp/tasks/studies.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <thread>

#include <fmt/format.h>

namespace pfp::tasks {

namespace {

// Runs n closures on up to `jobs` threads; results land in caller-indexed
// slots, so aggregation order never depends on scheduling.
void parallel_runs(int64_t n, int64_t jobs, const std::function<void(int64_t)>& fn) {
  jobs = std::max<int64_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int64_t> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<size_t>(n));
  for (int64_t t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (int64_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          errors[static_cast<size_t>(i)] = std::current_exception();
        }
      }
    });
  for (std::thread& th : pool) th.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double accuracy_of(const std::optional<metrics::ConfusionMatrix>& cm) {
  return cm ? metrics::accuracy_pct(*cm) : 0.0;
}

}  // namespace

std::vector<SweepPoint> run_lambda_sweep(const LoadedDataset& ds, std::span<const double> lambdas,
                                         int64_t seed_count, Openness openness, const TrainConfig& base,
                                         int64_t jobs) {
  if (lambdas.empty()) fail("tasks.bad_sweep", "lambda list is empty");
  if (seed_count < 1) fail("tasks.bad_sweep", "seed count must be >= 1");
  for (size_t i = 1; i < lambdas.size(); ++i) {
    if (lambdas[i] < lambdas[i - 1]) fail("tasks.bad_sweep", "lambda list must be ascending");
    if (lambdas[i] == lambdas[i - 1]) fail("tasks.bad_sweep", "duplicate lambda value {}", lambdas[i]);
  }
  for (double l : lambdas)
    if (l < 0.0) fail("tasks.bad_lambda", "persona loss weight must be >= 0, got {}", l);

  const int64_t n = static_cast<int64_t>(lambdas.size()) * seed_count;
  std::vector<std::pair<double, double>> results(static_cast<size_t>(n));  // (site, persona) test acc
  parallel_runs(n, jobs, [&](int64_t i) {
    const double lambda = lambdas[static_cast<size_t>(i) / seed_count];
    const int64_t run = i % seed_count;
    TrainConfig cfg = base;
    cfg.seed = base.seed + static_cast<uint64_t>(run);
    TrainedModel model = train_joint(ds, lambda, openness, cfg);
    EvalResult ev = evaluate_model(model, ds, ds.test);
    results[static_cast<size_t>(i)] = {accuracy_of(ev.site_cm), accuracy_of(ev.persona_cm)};
  });

  std::vector<SweepPoint> table;
  for (size_t li = 0; li < lambdas.size(); ++li) {
    std::vector<double> site, persona;
    for (int64_t run = 0; run < seed_count; ++run) {
      const auto& r = results[li * static_cast<size_t>(seed_count) + static_cast<size_t>(run)];
      site.push_back(r.first);
      persona.push_back(r.second);
    }
    table.push_back({lambdas[li], median(site), median(persona)});
  }
  return table;
}

std::vector<int64_t> subsample_per_persona(const LoadedDataset& ds, int64_t budget, uint64_t seed) {
  if (budget < 1) fail("tasks.bad_budget", "budget must be >= 1");
  std::map<uint16_t, std::vector<int64_t>> by_persona;
  for (int64_t i = 0; i < ds.train.size(); ++i)
    by_persona[ds.train.windows[static_cast<size_t>(i)].persona_label].push_back(i);

  std::string shortfalls;
  for (const auto& [label, idx] : by_persona)
    if (static_cast<int64_t>(idx.size()) < budget)
      shortfalls += fmt::format("{}{}: have {}, need {}", shortfalls.empty() ? "" : "; ",
                                ds.labels.persona_name(label), idx.size(), budget);
  if (!shortfalls.empty()) fail("tasks.budget_exceeds", "subsample budget too large ({})", shortfalls);

  std::vector<int64_t> subset;
  for (auto& [label, idx] : by_persona) {
    Rng rng(derive_seed(seed, "subsample", label));
    rng.shuffle(idx);
    subset.insert(subset.end(), idx.begin(), idx.begin() + budget);
  }
  std::sort(subset.begin(), subset.end());
  return subset;
}

std::vector<ScalingPoint> run_scaling_study(const LoadedDataset& ds, std::span<const int64_t> budgets,
                                            int64_t seed_count, const TrainConfig& base, int64_t jobs) {
  if (budgets.empty()) fail("tasks.bad_scaling", "budget list is empty");
  if (seed_count < 1) fail("tasks.bad_scaling", "seed count must be >= 1");

  // Validate every budget up front so errors surface before any training.
  for (int64_t b : budgets) subsample_per_persona(ds, b, base.seed);

  const int64_t n = static_cast<int64_t>(budgets.size()) * seed_count;
  std::vector<double> accs(static_cast<size_t>(n));
  parallel_runs(n, jobs, [&](int64_t i) {
    const int64_t budget = budgets[static_cast<size_t>(i) / seed_count];
    const int64_t run = i % seed_count;
    TrainConfig cfg = base;
    cfg.seed = base.seed + static_cast<uint64_t>(run);
    std::vector<int64_t> subset = subsample_per_persona(ds, budget, cfg.seed);
    TrainedModel model = train_persona_subset(ds, Openness::open_world, cfg, subset);
    EvalResult ev = evaluate_model(model, ds, ds.test);
    accs[static_cast<size_t>(i)] = accuracy_of(ev.persona_cm);
  });

  std::vector<ScalingPoint> table;
  for (size_t bi = 0; bi < budgets.size(); ++bi) {
    ScalingPoint p;
    p.budget = budgets[bi];
    double sum = 0.0;
    p.min_acc = 1e300;
    p.max_acc = -1e300;
    for (int64_t run = 0; run < seed_count; ++run) {
      double a = accs[bi * static_cast<size_t>(seed_count) + static_cast<size_t>(run)];
      sum += a;
      p.min_acc = std::min(p.min_acc, a);
      p.max_acc = std::max(p.max_acc, a);
    }
    p.mean_acc = sum / static_cast<double>(seed_count);
    double var = 0.0;
    for (int64_t run = 0; run < seed_count; ++run) {
      double a = accs[bi * static_cast<size_t>(seed_count) + static_cast<size_t>(run)];
      var += (a - p.mean_acc) * (a - p.mean_acc);
    }
    p.std_acc = std::sqrt(var / static_cast<double>(seed_count));
    table.push_back(p);
  }
  return table;
}

}  // namespace pfp::tasks
