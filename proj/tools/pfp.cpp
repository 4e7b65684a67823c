// SPDX-License-Identifier: Apache-2.0
//
// pfp - website & persona fingerprinting lab on synthetic encrypted-traffic
// metadata. Subcommands cover the full pipeline: simulate -> split ->
// train/probe/sweep/scaling -> eval -> report.

#include <cstdlib>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "pfp/cli/commands.hpp"
#include "pfp/common/error.hpp"

namespace {

std::optional<uint64_t> env_seed_override() {
  const char* v = std::getenv("PFP_SEED");
  if (!v || !*v) return std::nullopt;
  try {
    return std::stoull(v);
  } catch (...) {
    throw pfp::Error("cli.bad_env_seed", fmt::format("PFP_SEED is not a valid u64: '{}'", v));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"website & persona fingerprinting lab (synthetic traffic)"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  uint64_t seed_flag = 0;
  bool seed_set = false;
  bool force = false;
  int64_t jobs = 1;

  app.add_option("--config", config_path, "experiment config JSON")->required();
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.add_option("--seed", seed_flag, "global seed (overrides the config)")->each([&](const std::string&) {
    seed_set = true;
  });
  app.add_flag("--force", force, "redo steps even if already complete");
  app.add_option("--jobs", jobs, "parallel workers for sweep/scaling runs");

  auto* simulate = app.add_subcommand("simulate", "generate the synthetic dataset");
  auto* split = app.add_subcommand("split", "assign session splits and write window files");

  auto* train = app.add_subcommand("train", "train a model");
  pfp::cli::TrainArgs train_args;
  std::string scope_flag;
  double lambda_flag = -1.0;
  train->add_option("--task", train_args.selector, "config task name, or site/persona/joint")->required();
  train->add_option("--scope", scope_flag, "'mixed' or a site id (persona tasks)");
  train->add_flag("--open-world", train_args.open_world, "include the OW class");
  train->add_option("--lambda", lambda_flag, "persona loss weight (joint tasks)");

  auto* probe = app.add_subcommand("probe", "probe a frozen encoder for persona leakage");
  pfp::cli::ProbeArgs probe_args;
  std::string encoder_flag;
  probe->add_option("--encoder", encoder_flag, "task whose checkpoint provides the encoder");
  probe->add_flag("--random-control", probe_args.random_control, "probe a random frozen encoder instead");
  probe->add_flag("--paired", probe_args.paired, "run both probes and report the gap");

  auto* sweep = app.add_subcommand("sweep", "persona loss weight sweep");
  auto* scaling = app.add_subcommand("scaling", "training-budget scaling study");

  auto* eval = app.add_subcommand("eval", "full evaluation report for a trained task");
  std::string eval_task;
  eval->add_option("--task", eval_task, "task checkpoint to evaluate (defaults to the config's eval task)");

  auto* report = app.add_subcommand("report", "consolidate all step outputs");

  try {
    app.parse(argc, argv);

    std::optional<uint64_t> seed_override = env_seed_override();
    if (seed_set) seed_override = seed_flag;
    std::optional<std::filesystem::path> out_override;
    if (!out_dir.empty()) out_override = out_dir;

    pfp::cli::Ctx ctx{pfp::cli::load_config(config_path, seed_override, out_override), force, jobs};

    if (*simulate) return pfp::cli::cmd_simulate(ctx);
    if (*split) return pfp::cli::cmd_split(ctx);
    if (*train) {
      if (!scope_flag.empty()) train_args.scope = scope_flag;
      if (lambda_flag >= 0.0) train_args.lambda = lambda_flag;
      return pfp::cli::cmd_train(ctx, train_args);
    }
    if (*probe) {
      if (!encoder_flag.empty()) probe_args.encoder_task = encoder_flag;
      return pfp::cli::cmd_probe(ctx, probe_args);
    }
    if (*sweep) return pfp::cli::cmd_sweep(ctx);
    if (*scaling) return pfp::cli::cmd_scaling(ctx);
    if (*eval) return pfp::cli::cmd_eval(ctx, eval_task.empty() ? std::nullopt : std::make_optional(eval_task));
    if (*report) return pfp::cli::cmd_report(ctx);
    return 1;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    fmt::print(stderr, "pfp error [cli.usage]: {}\n", e.what());
    return 2;
  } catch (const pfp::Error& e) {
    fmt::print(stderr, "pfp error [{}]: {}\n", e.code(), e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "pfp error [internal]: {}\n", e.what());
    return 2;
  }
}
