// SPDX-License-Identifier: Apache-2.0
#include "pfp/cli/config.hpp"

#include <cmath>
#include <set>

#include <json.hpp>

#include "pfp/common/error.hpp"
#include "pfp/common/fsio.hpp"

namespace pfp::cli {

namespace {

using nlohmann::json;

tasks::TaskKind kind_from_name(const std::string& s) {
  if (s == "site") return tasks::TaskKind::site;
  if (s == "persona") return tasks::TaskKind::persona;
  if (s == "joint") return tasks::TaskKind::joint;
  fail("config.bad_task", "unknown task kind '{}'", s);
}

tasks::Openness openness_from_name(const std::string& s) {
  if (s == "closed") return tasks::Openness::closed;
  if (s == "open_world") return tasks::Openness::open_world;
  fail("config.bad_task", "unknown openness '{}'", s);
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir.string();
  j["dataset"] = {{"sites_file", c.dataset.sites_file.string()},
                  {"personas_file", c.dataset.personas_file.string()},
                  {"ow_pool_file", c.dataset.ow_pool_file.string()},
                  {"sites", c.dataset.sites},
                  {"personas", c.dataset.personas},
                  {"ow_personas", c.dataset.ow_personas},
                  {"windows_per_pair", c.dataset.windows_per_pair},
                  {"window_len", c.dataset.window_len},
                  {"step_budget", c.dataset.step_budget},
                  {"has_ow", c.dataset.has_ow}};
  j["split"] = {{"ratios", c.split_ratios}};
  j["model"] = {{"channels", c.model.channels},
                {"kernel", c.model.kernel},
                {"stride", c.model.stride},
                {"pool_factor", c.model.pool_factor},
                {"global_pool", c.model.global_pool == nn::GlobalPool::avg ? "avg" : "max"}};
  j["train"] = {{"epochs", c.epochs}, {"batch", c.batch}, {"lr", c.lr}};
  json tasks_j = json::array();
  for (const TaskSection& t : c.tasks) {
    json tj = {{"name", t.name},
               {"task", tasks::task_kind_name(t.kind)},
               {"openness", tasks::openness_name(t.openness)},
               {"lambda", t.lambda}};
    if (t.scope_site) tj["scope"] = *t.scope_site;
    if (t.epochs) tj["epochs"] = *t.epochs;
    if (t.batch) tj["batch"] = *t.batch;
    if (t.lr) tj["lr"] = *t.lr;
    tasks_j.push_back(std::move(tj));
  }
  j["tasks"] = std::move(tasks_j);
  if (c.probe)
    j["probe"] = {{"encoder_task", c.probe->encoder_task},
                  {"hidden", c.probe->hidden},
                  {"epochs", c.probe->epochs},
                  {"batch", c.probe->batch},
                  {"lr", c.probe->lr}};
  if (c.sweep) {
    j["sweep"] = {{"lambdas", c.sweep->lambdas}, {"seeds", c.sweep->seeds}};
    if (c.sweep->epochs) j["sweep"]["epochs"] = *c.sweep->epochs;
  }
  if (c.scaling) {
    j["scaling"] = {{"budgets", c.scaling->budgets}, {"seeds", c.scaling->seeds}};
    if (c.scaling->epochs) j["scaling"]["epochs"] = *c.scaling->epochs;
  }
  if (c.eval)
    j["eval"] = {{"task", c.eval->task},
                 {"alpha", c.eval->alpha},
                 {"segment_len", c.eval->segment_len},
                 {"flag_floor", c.eval->flag_floor}};
  return j;
}

}  // namespace

std::string ExperimentConfig::canonical_dump() const { return config_to_json(*this).dump(); }

uint64_t ExperimentConfig::hash() const { return fnv1a64(canonical_dump()); }

const TaskSection& ExperimentConfig::task(const std::string& name) const {
  for (const TaskSection& t : tasks)
    if (t.name == name) return t;
  std::string known;
  for (const TaskSection& t : tasks) known += (known.empty() ? "" : ", ") + t.name;
  fail("cli.unknown_task", "unknown task '{}' (known: {})", name, known);
}

tasks::TrainConfig ExperimentConfig::train_config(const TaskSection& t) const {
  tasks::TrainConfig cfg;
  cfg.epochs = t.epochs.value_or(epochs);
  cfg.batch = t.batch.value_or(batch);
  cfg.lr = t.lr.value_or(lr);
  cfg.seed = seed;
  cfg.arch = model;
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, std::optional<uint64_t> seed_override,
                             std::optional<std::filesystem::path> out_override) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) fail("config.malformed", "{} is not valid JSON", path.string());

  ExperimentConfig c;
  try {
    c.seed = j.value("seed", 42ull);
    c.out_dir = j.value("out_dir", std::string("out"));

    const json& d = j.at("dataset");
    c.dataset.sites_file = d.at("sites_file").get<std::string>();
    c.dataset.personas_file = d.at("personas_file").get<std::string>();
    c.dataset.ow_pool_file = d.value("ow_pool_file", std::string());
    c.dataset.sites = d.value("sites", std::vector<std::string>{});
    c.dataset.personas = d.value("personas", std::vector<std::string>{});
    c.dataset.ow_personas = d.value("ow_personas", std::vector<std::string>{});
    c.dataset.windows_per_pair = d.value("windows_per_pair", 200);
    c.dataset.window_len = d.value("window_len", 1000);
    c.dataset.step_budget = d.value("step_budget", 120);
    c.dataset.has_ow = d.value("has_ow", true);

    if (j.contains("split")) {
      auto r = j.at("split").at("ratios");
      for (int i = 0; i < 3; ++i) c.split_ratios[static_cast<size_t>(i)] = r.at(i).get<double>();
    }
    if (j.contains("model")) {
      const json& m = j.at("model");
      c.model.channels = m.value("channels", c.model.channels);
      c.model.kernel = m.value("kernel", c.model.kernel);
      c.model.stride = m.value("stride", c.model.stride);
      c.model.pool_factor = m.value("pool_factor", c.model.pool_factor);
      c.model.global_pool =
          m.value("global_pool", std::string("avg")) == "max" ? nn::GlobalPool::max : nn::GlobalPool::avg;
    }
    if (j.contains("train")) {
      const json& t = j.at("train");
      c.epochs = t.value("epochs", c.epochs);
      c.batch = t.value("batch", c.batch);
      c.lr = t.value("lr", c.lr);
    }
    for (const json& tj : j.value("tasks", json::array())) {
      TaskSection t;
      t.name = tj.at("name").get<std::string>();
      t.kind = kind_from_name(tj.at("task").get<std::string>());
      t.openness = openness_from_name(tj.value("openness", std::string("open_world")));
      if (tj.contains("scope") && tj.at("scope").get<std::string>() != "mixed")
        t.scope_site = tj.at("scope").get<std::string>();
      t.lambda = tj.value("lambda", 1.0);
      if (tj.contains("epochs")) t.epochs = tj.at("epochs").get<int64_t>();
      if (tj.contains("batch")) t.batch = tj.at("batch").get<int64_t>();
      if (tj.contains("lr")) t.lr = tj.at("lr").get<double>();
      c.tasks.push_back(std::move(t));
    }
    if (j.contains("probe")) {
      ProbeSection p;
      const json& pj = j.at("probe");
      p.encoder_task = pj.at("encoder_task").get<std::string>();
      p.hidden = pj.value("hidden", p.hidden);
      p.epochs = pj.value("epochs", p.epochs);
      p.batch = pj.value("batch", p.batch);
      p.lr = pj.value("lr", p.lr);
      c.probe = p;
    }
    if (j.contains("sweep")) {
      SweepSection s;
      const json& sj = j.at("sweep");
      s.lambdas = sj.at("lambdas").get<std::vector<double>>();
      s.seeds = sj.value("seeds", s.seeds);
      if (sj.contains("epochs")) s.epochs = sj.at("epochs").get<int64_t>();
      c.sweep = s;
    }
    if (j.contains("scaling")) {
      ScalingSection s;
      const json& sj = j.at("scaling");
      s.budgets = sj.at("budgets").get<std::vector<int64_t>>();
      s.seeds = sj.value("seeds", s.seeds);
      if (sj.contains("epochs")) s.epochs = sj.at("epochs").get<int64_t>();
      c.scaling = s;
    }
    if (j.contains("eval")) {
      EvalSection e;
      const json& ej = j.at("eval");
      e.task = ej.at("task").get<std::string>();
      e.alpha = ej.value("alpha", e.alpha);
      e.segment_len = ej.value("segment_len", e.segment_len);
      e.flag_floor = ej.value("flag_floor", e.flag_floor);
      c.eval = e;
    }
  } catch (const json::exception& e) {
    fail("config.malformed", "{}: {}", path.string(), e.what());
  }

  if (seed_override) c.seed = *seed_override;
  if (out_override) c.out_dir = *out_override;

  // Profile paths are relative to the config file's directory.
  const std::filesystem::path base = path.parent_path();
  auto anchor = [&](std::filesystem::path& p) {
    if (!p.empty() && p.is_relative()) p = base / p;
  };
  anchor(c.dataset.sites_file);
  anchor(c.dataset.personas_file);
  anchor(c.dataset.ow_pool_file);

  // Validation.
  double rsum = c.split_ratios[0] + c.split_ratios[1] + c.split_ratios[2];
  if (std::abs(rsum - 1.0) > 1e-9) fail("config.bad_ratios", "split ratios must sum to 1, got {}", rsum);
  if (c.dataset.window_len < 1) fail("config.bad_window_len", "window_len must be >= 1");
  for (const std::filesystem::path* p : {&c.dataset.sites_file, &c.dataset.personas_file})
    if (!std::filesystem::exists(*p)) fail("config.missing_file", "profile file not found: {}", p->string());
  if (c.dataset.has_ow) {
    if (c.dataset.ow_pool_file.empty())
      fail("config.missing_file", "has_ow is true but no ow_pool_file is configured");
    if (!std::filesystem::exists(c.dataset.ow_pool_file))
      fail("config.missing_file", "profile file not found: {}", c.dataset.ow_pool_file.string());
  }
  std::set<std::string> names;
  for (const TaskSection& t : c.tasks)
    if (!names.insert(t.name).second) fail("config.duplicate_task", "duplicate task name '{}'", t.name);
  return c;
}

ResolvedProfiles resolve_profiles(const ExperimentConfig& cfg) {
  ResolvedProfiles out;
  auto pick = [](auto all, const std::vector<std::string>& ids, const char* what) {
    if (ids.empty()) return all;
    decltype(all) chosen;
    for (const std::string& id : ids) {
      bool found = false;
      for (const auto& item : all)
        if (item.id == id) {
          chosen.push_back(item);
          found = true;
          break;
        }
      if (!found) fail("config.unknown_id", "{} id '{}' not present in profile file", what, id);
    }
    return chosen;
  };
  out.sites = pick(sim::load_sites(cfg.dataset.sites_file), cfg.dataset.sites, "site");
  out.personas = pick(sim::load_personas(cfg.dataset.personas_file), cfg.dataset.personas, "persona");
  if (cfg.dataset.has_ow)
    out.ow_pool = pick(sim::load_personas(cfg.dataset.ow_pool_file), cfg.dataset.ow_personas, "OW persona");
  return out;
}

}  // namespace pfp::cli
