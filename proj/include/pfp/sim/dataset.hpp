// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <vector>

#include "pfp/sim/spec.hpp"
#include "pfp/trace/manifest.hpp"

namespace pfp::sim {

struct DatasetBuildConfig {
  std::filesystem::path out_dir;
  int64_t windows_target = 200;  // windows per (site, persona) pair
  int64_t window_len = 1000;
  int64_t step_budget = 120;
  uint64_t seed = 42;
  bool has_ow = true;
};

struct StratumCount {
  std::string site;
  std::string persona;  // label-space name; OW sessions aggregate here
  int64_t windows = 0;
  int64_t sessions = 0;
};

struct BuildResult {
  trace::DatasetManifest manifest;
  std::vector<StratumCount> counts;
};

// Simulates sessions per (site, persona) until windows_target full windows
// exist for every pair, writing per-pair trace NDJSON files, one action-log
// NDJSON, and the dataset manifest under out_dir. Open-world traffic cycles
// through ow_pool variants and is folded into the single OW label, balanced
// per site to the same windows_target. The final session of each pair is
// trimmed at a window boundary so every pair lands on the target exactly.
BuildResult build_dataset(const std::vector<SiteSpec>& sites, const std::vector<PersonaSpec>& canonical,
                          const std::vector<PersonaSpec>& ow_pool, const DatasetBuildConfig& cfg);

}  // namespace pfp::sim
