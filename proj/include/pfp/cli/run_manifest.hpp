// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pfp::cli {

// Pipeline step ordering; later steps are invalidated whenever an earlier
// one re-executes. Train steps are named "train:<task>" and share one rank.
int step_rank(const std::string& step_name);

struct StepRecord {
  std::string status;  // "complete" is the only persisted state
  std::vector<std::string> outputs;  // paths relative to the run dir
  double duration_s = 0.0;
};

// Per-run bookkeeping written atomically at every step boundary. A step may
// be skipped on re-run when the config hash matches, the step is recorded
// complete, and its outputs still exist.
class RunManifest {
 public:
  RunManifest(std::filesystem::path run_dir, uint64_t config_hash);

  // Loads existing state; resets everything if the stored hash differs.
  void load_or_init();

  bool can_skip(const std::string& step) const;
  void begin(const std::string& step);              // drops this step + later ones
  void complete(const std::string& step, std::vector<std::string> outputs, double duration_s);

  const std::map<std::string, StepRecord>& steps() const { return steps_; }
  std::optional<StepRecord> step(const std::string& name) const;
  const std::filesystem::path& dir() const { return run_dir_; }

 private:
  void save() const;

  std::filesystem::path run_dir_;
  uint64_t config_hash_ = 0;
  std::map<std::string, StepRecord> steps_;
};

}  // namespace pfp::cli
