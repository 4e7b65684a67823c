// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>

#include "pfp/cli/config.hpp"
#include "pfp/cli/run_manifest.hpp"

namespace pfp::cli {

struct Ctx {
  ExperimentConfig config;
  bool force = false;
  int64_t jobs = 1;
};

struct TrainArgs {
  std::string selector;  // config task name, or a kind (site/persona/joint)
  std::optional<std::string> scope;  // "mixed" or a site id
  bool open_world = false;
  std::optional<double> lambda;
};

struct ProbeArgs {
  std::optional<std::string> encoder_task;  // defaults to config.probe.encoder_task
  bool random_control = false;              // run only the random-control probe
  bool paired = false;                      // run both and report the gap
};

int cmd_simulate(Ctx& ctx);
int cmd_split(Ctx& ctx);
int cmd_train(Ctx& ctx, const TrainArgs& args);
int cmd_probe(Ctx& ctx, const ProbeArgs& args);
int cmd_sweep(Ctx& ctx);
int cmd_scaling(Ctx& ctx);
int cmd_eval(Ctx& ctx, std::optional<std::string> task_override);
int cmd_report(Ctx& ctx);

}  // namespace pfp::cli
