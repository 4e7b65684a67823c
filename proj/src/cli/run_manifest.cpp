// SPDX-License-Identifier: Apache-2.0
#include "pfp/cli/run_manifest.hpp"

#include <json.hpp>

#include "pfp/common/error.hpp"
#include "pfp/common/fsio.hpp"

namespace pfp::cli {

namespace {
constexpr const char* kFileName = "run_manifest.json";
}

int step_rank(const std::string& step_name) {
  if (step_name == "simulate") return 0;
  if (step_name == "split") return 1;
  if (step_name.starts_with("train:")) return 2;
  if (step_name == "probe") return 3;
  if (step_name == "sweep") return 4;
  if (step_name == "scaling") return 5;
  if (step_name == "eval") return 6;
  if (step_name == "report") return 7;
  fail("cli.unknown_step", "unknown pipeline step '{}'", step_name);
}

RunManifest::RunManifest(std::filesystem::path run_dir, uint64_t config_hash)
    : run_dir_(std::move(run_dir)), config_hash_(config_hash) {}

void RunManifest::load_or_init() {
  steps_.clear();
  const std::filesystem::path path = run_dir_ / kFileName;
  if (!std::filesystem::exists(path)) return;
  nlohmann::json j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) return;  // treat a corrupt manifest as a fresh run
  if (j.value("config_hash", std::string()) != to_hex(config_hash_)) return;
  const nlohmann::json steps_j = j.value("steps", nlohmann::json::object());
  for (const auto& [name, sj] : steps_j.items()) {
    StepRecord r;
    r.status = sj.value("status", std::string());
    r.outputs = sj.value("outputs", std::vector<std::string>{});
    r.duration_s = sj.value("duration_s", 0.0);
    steps_[name] = std::move(r);
  }
}

bool RunManifest::can_skip(const std::string& step) const {
  auto it = steps_.find(step);
  if (it == steps_.end() || it->second.status != "complete") return false;
  for (const std::string& out : it->second.outputs)
    if (!std::filesystem::exists(run_dir_ / out)) return false;
  return true;
}

void RunManifest::begin(const std::string& step) {
  const int rank = step_rank(step);
  for (auto it = steps_.begin(); it != steps_.end();) {
    if (it->first == step || step_rank(it->first) > rank)
      it = steps_.erase(it);
    else
      ++it;
  }
  save();
}

void RunManifest::complete(const std::string& step, std::vector<std::string> outputs, double duration_s) {
  steps_[step] = StepRecord{"complete", std::move(outputs), duration_s};
  save();
}

std::optional<StepRecord> RunManifest::step(const std::string& name) const {
  auto it = steps_.find(name);
  if (it == steps_.end()) return std::nullopt;
  return it->second;
}

void RunManifest::save() const {
  nlohmann::json j;
  j["config_hash"] = to_hex(config_hash_);
  j["formats"] = {{"window_file", 1}, {"checkpoint", 1}};
  nlohmann::json steps = nlohmann::json::object();
  for (const auto& [name, r] : steps_)
    steps[name] = {{"status", r.status}, {"outputs", r.outputs}, {"duration_s", r.duration_s}};
  j["steps"] = std::move(steps);
  atomic_write_file(run_dir_ / kFileName, j.dump(1) + "\n");
}

}  // namespace pfp::cli
