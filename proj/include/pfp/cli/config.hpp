// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pfp/nn/model.hpp"
#include "pfp/sim/spec.hpp"
#include "pfp/tasks/probe.hpp"
#include "pfp/tasks/train.hpp"

namespace pfp::cli {

struct DatasetSection {
  std::filesystem::path sites_file;
  std::filesystem::path personas_file;
  std::filesystem::path ow_pool_file;  // may be empty when has_ow is false
  std::vector<std::string> sites;      // ids to use; empty = all in file
  std::vector<std::string> personas;
  std::vector<std::string> ow_personas;
  int64_t windows_per_pair = 200;
  int64_t window_len = 1000;
  int64_t step_budget = 120;
  bool has_ow = true;
};

struct TaskSection {
  std::string name;
  tasks::TaskKind kind = tasks::TaskKind::site;
  tasks::Openness openness = tasks::Openness::open_world;
  std::optional<std::string> scope_site;  // persona task conditioned on one site
  double lambda = 1.0;
  std::optional<int64_t> epochs, batch;
  std::optional<double> lr;
};

struct ProbeSection {
  std::string encoder_task;  // task whose checkpoint provides the frozen encoder
  int64_t hidden = 64;
  int64_t epochs = 40;
  int64_t batch = 128;
  double lr = 2e-3;
};

struct SweepSection {
  std::vector<double> lambdas;
  int64_t seeds = 3;
  std::optional<int64_t> epochs;
};

struct ScalingSection {
  std::vector<int64_t> budgets;
  int64_t seeds = 3;
  std::optional<int64_t> epochs;
};

struct EvalSection {
  std::string task;  // checkpoint used for embeddings / metrics
  double alpha = 0.5;
  int64_t segment_len = 5;
  double flag_floor = 0.3;
};

struct ExperimentConfig {
  uint64_t seed = 42;
  std::filesystem::path out_dir;
  DatasetSection dataset;
  std::array<double, 3> split_ratios{0.7, 0.1, 0.2};
  nn::EncoderConfig model;
  int64_t epochs = 20;
  int64_t batch = 64;
  double lr = 1e-3;
  std::vector<TaskSection> tasks;
  std::optional<ProbeSection> probe;
  std::optional<SweepSection> sweep;
  std::optional<ScalingSection> scaling;
  std::optional<EvalSection> eval;

  std::string canonical_dump() const;  // hashed for run-manifest resumability
  uint64_t hash() const;

  const TaskSection& task(const std::string& name) const;

  tasks::TrainConfig train_config(const TaskSection& t) const;
};

// Parses and validates a config file; referenced profile files must exist.
// `seed_override` (from --seed or PFP_SEED) and `out_override` replace the
// config's values before validation and hashing.
ExperimentConfig load_config(const std::filesystem::path& path, std::optional<uint64_t> seed_override,
                             std::optional<std::filesystem::path> out_override);

// Resolved persona/site specs after applying the id selections.
struct ResolvedProfiles {
  std::vector<sim::SiteSpec> sites;
  std::vector<sim::PersonaSpec> personas;
  std::vector<sim::PersonaSpec> ow_pool;
};

ResolvedProfiles resolve_profiles(const ExperimentConfig& cfg);

}  // namespace pfp::cli
