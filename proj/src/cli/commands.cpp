// SPDX-License-Identifier: Apache-2.0
#include "pfp/cli/commands.hpp"

#include <chrono>
#include <map>

#include <fmt/format.h>

#include "pfp/cli/report.hpp"
#include "pfp/common/error.hpp"
#include "pfp/common/fsio.hpp"
#include "pfp/sim/dataset.hpp"
#include "pfp/tasks/studies.hpp"
#include "pfp/trace/parse.hpp"
#include "pfp/trace/split.hpp"
#include "pfp/trace/window_file.hpp"
#include "pfp/trace/windows.hpp"

namespace pfp::cli {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

RunManifest open_manifest(const Ctx& ctx) {
  std::filesystem::create_directories(ctx.config.out_dir);
  RunManifest m(ctx.config.out_dir, ctx.config.hash());
  m.load_or_init();
  return m;
}

// Standard step wrapper: honors completed steps (unless --force), times the
// body, and records outputs.
template <typename Body>
int run_step(Ctx& ctx, const std::string& step, Body&& body) {
  RunManifest manifest = open_manifest(ctx);
  if (!ctx.force && manifest.can_skip(step)) {
    fmt::print("[{}] already complete, skipping (use --force to redo)\n", step);
    return 0;
  }
  manifest.begin(step);
  Clock::time_point t0 = Clock::now();
  std::vector<std::string> outputs = body();
  manifest.complete(step, outputs, seconds_since(t0));
  fmt::print("[{}] done in {:.1f}s\n", step, seconds_since(t0));
  return 0;
}

tasks::LoadedDataset load_split_dataset(const Ctx& ctx) {
  return tasks::load_dataset_dir(ctx.config.out_dir / "splits", ctx.config.out_dir / "dataset" / "manifest.json");
}

uint16_t site_index(const trace::LabelSpace& labels, const std::string& id) {
  for (size_t i = 0; i < labels.sites.size(); ++i)
    if (labels.sites[i] == id) return static_cast<uint16_t>(i);
  fail("cli.unknown_site", "site '{}' is not part of the dataset", id);
}

uint16_t persona_index(const trace::LabelSpace& labels, const std::string& name) {
  for (size_t i = 0; i < labels.personas.size(); ++i)
    if (labels.personas[i] == name) return static_cast<uint16_t>(i);
  if (labels.has_ow && name == "OW") return labels.ow_index();
  fail("cli.unknown_persona", "persona '{}' is not part of the dataset", name);
}

std::string train_log_csv(const tasks::TrainedModel& model) {
  std::string csv = "epoch,train_loss,val_site_acc,val_persona_acc\n";
  for (const tasks::EpochLog& e : model.log) {
    csv += fmt::format("{},{:.6f},", e.epoch, e.train_loss);
    if (e.val_site_acc >= 0) csv += fmt::format("{:.1f}", e.val_site_acc);
    csv += ",";
    if (e.val_persona_acc >= 0) csv += fmt::format("{:.1f}", e.val_persona_acc);
    csv += "\n";
  }
  return csv;
}

json probe_result_json(const tasks::ProbeResult& r) {
  return {{"provenance", tasks::provenance_name(r.provenance)},
          {"val_acc", metrics::round1(r.val_acc)},
          {"test_acc", metrics::round1(r.test_acc)},
          {"val_macro_f1", metrics::round1(r.val_macro_f1)},
          {"test_macro_f1", metrics::round1(r.test_macro_f1)},
          {"budget", r.budget}};
}

tasks::TrainedModel load_task_checkpoint(const Ctx& ctx, const std::string& task_name,
                                         const tasks::LoadedDataset& ds) {
  const std::filesystem::path path = ctx.config.out_dir / "train" / task_name / "checkpoint.pfpr";
  if (!std::filesystem::exists(path))
    fail("cli.missing_step", "no checkpoint for task '{}' (expected {})", task_name, path.string());
  nn::Checkpoint ckpt = nn::load_checkpoint(path);
  if (tasks::checkpoint_label_hash(ckpt) != ds.labels.hash())
    fail("cli.label_space_mismatch", "checkpoint {} was trained on a different label space", path.string());
  return tasks::model_from_checkpoint(ckpt);
}

}  // namespace

int cmd_simulate(Ctx& ctx) {
  return run_step(ctx, "simulate", [&] {
    const std::filesystem::path dataset_dir = ctx.config.out_dir / "dataset";
    if (std::filesystem::exists(dataset_dir / "manifest.json") && !ctx.force)
      fail("cli.output_collision", "{} already exists; pass --force to overwrite",
           (dataset_dir / "manifest.json").string());

    ResolvedProfiles profiles = resolve_profiles(ctx.config);
    sim::DatasetBuildConfig bc;
    bc.out_dir = dataset_dir;
    bc.windows_target = ctx.config.dataset.windows_per_pair;
    bc.window_len = ctx.config.dataset.window_len;
    bc.step_budget = ctx.config.dataset.step_budget;
    bc.seed = derive_seed(ctx.config.seed, "simulate");
    bc.has_ow = ctx.config.dataset.has_ow;
    sim::BuildResult result = sim::build_dataset(profiles.sites, profiles.personas, profiles.ow_pool, bc);

    json counts = json::array();
    fmt::print("{:<14} {:<8} {:>8} {:>9}\n", "site", "persona", "windows", "sessions");
    for (const sim::StratumCount& c : result.counts) {
      fmt::print("{:<14} {:<8} {:>8} {:>9}\n", c.site, c.persona, c.windows, c.sessions);
      counts.push_back(
          {{"site", c.site}, {"persona", c.persona}, {"windows", c.windows}, {"sessions", c.sessions}});
    }
    atomic_write_file(dataset_dir / "counts.json", counts.dump(1) + "\n");
    return std::vector<std::string>{"dataset/manifest.json", "dataset/actions.ndjson", "dataset/counts.json"};
  });
}

int cmd_split(Ctx& ctx) {
  return run_step(ctx, "split", [&] {
    const std::filesystem::path dataset_dir = ctx.config.out_dir / "dataset";
    trace::DatasetManifest manifest = trace::read_manifest(dataset_dir / "manifest.json");

    std::vector<trace::SessionLabel> sessions;
    for (const trace::SessionEntry& s : manifest.sessions) sessions.push_back({s.sess, s.site, s.persona});
    trace::SplitAssignment split =
        trace::assign_splits(sessions, ctx.config.split_ratios, derive_seed(ctx.config.seed, "split"));

    // Traces are grouped by file in manifest order; parse each file once.
    std::vector<trace::Window> parts[3];
    std::string current_file;
    std::map<std::string, std::vector<trace::PacketRecord>> records_by_session;
    for (const trace::SessionEntry& s : manifest.sessions) {
      if (s.trace_file != current_file) {
        current_file = s.trace_file;
        records_by_session.clear();
        std::vector<trace::PacketRecord> records = trace::parse_trace_file(dataset_dir / s.trace_file);
        for (trace::PacketRecord& r : records) records_by_session[r.session_id].push_back(std::move(r));
      }
      auto it = records_by_session.find(s.sess);
      if (it == records_by_session.end())
        fail("cli.missing_session", "manifest session {} not found in {}", s.sess, s.trace_file);
      const std::vector<trace::PacketRecord>& recs = it->second;
      std::vector<uint32_t> gaps = trace::compute_gaps(recs);
      std::vector<trace::Window> windows =
          trace::extract_windows(recs, gaps, ctx.config.dataset.window_len,
                                 site_index(manifest.label_space, s.site),
                                 persona_index(manifest.label_space, s.persona));
      auto& dst = parts[static_cast<size_t>(split.by_session.at(s.sess))];
      for (trace::Window& w : windows) dst.push_back(std::move(w));
    }

    const std::filesystem::path splits_dir = ctx.config.out_dir / "splits";
    std::filesystem::create_directories(splits_dir);
    atomic_write_file(splits_dir / "split.json", trace::split_to_json(split));
    trace::write_windows(splits_dir / "train.pfwn", parts[0], ctx.config.dataset.window_len);
    trace::write_windows(splits_dir / "val.pfwn", parts[1], ctx.config.dataset.window_len);
    trace::write_windows(splits_dir / "test.pfwn", parts[2], ctx.config.dataset.window_len);
    fmt::print("split windows: train={} val={} test={}\n", parts[0].size(), parts[1].size(), parts[2].size());
    return std::vector<std::string>{"splits/split.json", "splits/train.pfwn", "splits/val.pfwn",
                                    "splits/test.pfwn"};
  });
}

namespace {

TaskSection resolve_task(const Ctx& ctx, const TrainArgs& args) {
  TaskSection t;
  bool from_config = false;
  for (const TaskSection& known : ctx.config.tasks)
    if (known.name == args.selector) {
      t = known;
      from_config = true;
      break;
    }
  if (!from_config) {
    if (args.selector != "site" && args.selector != "persona" && args.selector != "joint") {
      // Reuse the config lookup for its error message listing known names.
      ctx.config.task(args.selector);
    }
    t.name = args.selector;
    t.kind = args.selector == "site"      ? tasks::TaskKind::site
             : args.selector == "persona" ? tasks::TaskKind::persona
                                          : tasks::TaskKind::joint;
    t.openness = tasks::Openness::closed;
    t.lambda = 1.0;
  }
  if (args.open_world) t.openness = tasks::Openness::open_world;
  if (args.scope && *args.scope != "mixed") t.scope_site = *args.scope;
  if (args.scope && *args.scope == "mixed") t.scope_site.reset();
  if (args.lambda) t.lambda = *args.lambda;
  return t;
}

}  // namespace

int cmd_train(Ctx& ctx, const TrainArgs& args) {
  const TaskSection task = resolve_task(ctx, args);
  return run_step(ctx, "train:" + task.name, [&] {
    tasks::LoadedDataset ds = load_split_dataset(ctx);
    tasks::TrainConfig cfg = ctx.config.train_config(task);

    tasks::TrainedModel model;
    switch (task.kind) {
      case tasks::TaskKind::site: model = tasks::train_site_only(ds, cfg); break;
      case tasks::TaskKind::persona: {
        std::optional<uint16_t> scope;
        if (task.scope_site) scope = site_index(ds.labels, *task.scope_site);
        model = tasks::train_persona(ds, scope, task.openness, cfg);
        break;
      }
      case tasks::TaskKind::joint: model = tasks::train_joint(ds, task.lambda, task.openness, cfg); break;
    }

    const std::filesystem::path dir = ctx.config.out_dir / "train" / task.name;
    std::filesystem::create_directories(dir);
    nn::save_checkpoint(tasks::to_checkpoint(model, ds), dir / "checkpoint.pfpr");
    atomic_write_file(dir / "train_log.csv", train_log_csv(model));
    json report = model_report(model, ds);
    atomic_write_file(dir / "report.json", report.dump(1) + "\n");

    if (report.contains("site_metrics"))
      fmt::print("site: acc={} macro_f1={}\n", report["site_metrics"]["accuracy"].dump(),
                 report["site_metrics"]["macro_f1"].dump());
    if (report.contains("persona_metrics"))
      fmt::print("persona: acc={} macro_f1={}\n", report["persona_metrics"]["accuracy"].dump(),
                 report["persona_metrics"]["macro_f1"].dump());
    const std::string rel = "train/" + task.name + "/";
    return std::vector<std::string>{rel + "checkpoint.pfpr", rel + "train_log.csv", rel + "report.json"};
  });
}

int cmd_probe(Ctx& ctx, const ProbeArgs& args) {
  return run_step(ctx, "probe", [&] {
    if (!ctx.config.probe && !args.encoder_task && !args.random_control)
      fail("config.missing_section", "no probe section in the config and no --encoder given");
    tasks::LoadedDataset ds = load_split_dataset(ctx);

    tasks::ProbeConfig pc;
    if (ctx.config.probe) {
      pc.hidden = ctx.config.probe->hidden;
      pc.epochs = ctx.config.probe->epochs;
      pc.batch = ctx.config.probe->batch;
      pc.lr = ctx.config.probe->lr;
    }
    pc.seed = ctx.config.seed;
    pc.openness = ds.labels.has_ow ? tasks::Openness::open_world : tasks::Openness::closed;

    json out;
    out["budget"] = fmt::format("mlp(hidden={},epochs={},batch={},lr={})", pc.hidden, pc.epochs, pc.batch,
                                pc.lr);
    auto trained_probe = [&] {
      std::string task = args.encoder_task.value_or(ctx.config.probe ? ctx.config.probe->encoder_task : "");
      if (task.empty()) fail("config.missing_section", "no encoder task configured for probing");
      tasks::TrainedModel model = load_task_checkpoint(ctx, task, ds);
      return tasks::probe_personas(model.encoder, tasks::EncoderProvenance::wfp_trained, ds, pc);
    };
    auto random_probe = [&] {
      nn::EncoderModel<float> enc = tasks::make_random_control_encoder(ctx.config.model, ctx.config.seed);
      return tasks::probe_personas(enc, tasks::EncoderProvenance::random_control, ds, pc);
    };

    if (args.paired) {
      tasks::ProbeResult trained = trained_probe();
      tasks::ProbeResult random = random_probe();
      out["trained"] = probe_result_json(trained);
      out["random"] = probe_result_json(random);
      out["trained_acc"] = metrics::round1(trained.test_acc);
      out["random_acc"] = metrics::round1(random.test_acc);
      out["gap"] = metrics::round1(trained.test_acc - random.test_acc);
      fmt::print("probe: trained={:.1f} random={:.1f} gap={:.1f}\n", trained.test_acc, random.test_acc,
                 trained.test_acc - random.test_acc);
    } else if (args.random_control) {
      tasks::ProbeResult r = random_probe();
      out["random"] = probe_result_json(r);
      fmt::print("probe: random={:.1f}\n", r.test_acc);
    } else {
      tasks::ProbeResult r = trained_probe();
      out["trained"] = probe_result_json(r);
      fmt::print("probe: trained={:.1f}\n", r.test_acc);
    }
    std::filesystem::create_directories(ctx.config.out_dir / "probe");
    atomic_write_file(ctx.config.out_dir / "probe" / "probe.json", out.dump(1) + "\n");
    return std::vector<std::string>{"probe/probe.json"};
  });
}

int cmd_sweep(Ctx& ctx) {
  return run_step(ctx, "sweep", [&] {
    if (!ctx.config.sweep) fail("config.missing_section", "no sweep section in the config");
    tasks::LoadedDataset ds = load_split_dataset(ctx);
    tasks::TrainConfig base;
    base.epochs = ctx.config.sweep->epochs.value_or(ctx.config.epochs);
    base.batch = ctx.config.batch;
    base.lr = ctx.config.lr;
    base.seed = ctx.config.seed;
    base.arch = ctx.config.model;
    tasks::Openness openness = ds.labels.has_ow ? tasks::Openness::open_world : tasks::Openness::closed;
    std::vector<tasks::SweepPoint> table = tasks::run_lambda_sweep(
        ds, ctx.config.sweep->lambdas, ctx.config.sweep->seeds, openness, base, ctx.jobs);

    std::string csv = "lambda,site_acc,persona_acc\n";
    for (const tasks::SweepPoint& p : table) {
      csv += fmt::format("{:g},{:.1f},{:.1f}\n", p.lambda, p.site_acc, p.persona_acc);
      fmt::print("lambda={:g}: site={:.1f} persona={:.1f}\n", p.lambda, p.site_acc, p.persona_acc);
    }
    atomic_write_file(ctx.config.out_dir / "sweep.csv", csv);
    return std::vector<std::string>{"sweep.csv"};
  });
}

int cmd_scaling(Ctx& ctx) {
  return run_step(ctx, "scaling", [&] {
    if (!ctx.config.scaling) fail("config.missing_section", "no scaling section in the config");
    tasks::LoadedDataset ds = load_split_dataset(ctx);
    tasks::TrainConfig base;
    base.epochs = ctx.config.scaling->epochs.value_or(ctx.config.epochs);
    base.batch = ctx.config.batch;
    base.lr = ctx.config.lr;
    base.seed = ctx.config.seed;
    base.arch = ctx.config.model;
    std::vector<tasks::ScalingPoint> table =
        tasks::run_scaling_study(ds, ctx.config.scaling->budgets, ctx.config.scaling->seeds, base, ctx.jobs);

    std::string csv = "budget,mean_acc,std_acc,min_acc,max_acc\n";
    for (const tasks::ScalingPoint& p : table) {
      csv += fmt::format("{},{:.1f},{:.2f},{:.1f},{:.1f}\n", p.budget, p.mean_acc, p.std_acc, p.min_acc,
                         p.max_acc);
      fmt::print("budget={}: {:.1f}+-{:.2f} ({:.1f}-{:.1f})\n", p.budget, p.mean_acc, p.std_acc, p.min_acc,
                 p.max_acc);
    }
    atomic_write_file(ctx.config.out_dir / "scaling.csv", csv);
    return std::vector<std::string>{"scaling.csv"};
  });
}

int cmd_eval(Ctx& ctx, std::optional<std::string> task_override) {
  return run_step(ctx, "eval", [&] {
    std::string task;
    if (task_override)
      task = *task_override;
    else if (ctx.config.eval)
      task = ctx.config.eval->task;
    else
      fail("config.missing_section", "no eval section in the config and no --task given");

    tasks::LoadedDataset ds = load_split_dataset(ctx);
    tasks::TrainedModel model = load_task_checkpoint(ctx, task, ds);
    ResolvedProfiles profiles = resolve_profiles(ctx.config);
    trace::DatasetManifest manifest = trace::read_manifest(ctx.config.out_dir / "dataset" / "manifest.json");

    const double alpha = ctx.config.eval ? ctx.config.eval->alpha : 0.5;
    const int64_t segment_len = ctx.config.eval ? ctx.config.eval->segment_len : 5;
    const double flag_floor = ctx.config.eval ? ctx.config.eval->flag_floor : 0.3;

    json report = model_report(model, ds);
    report["diversity"] = diversity_section(build_diversity_report(
        profiles, manifest, ctx.config.out_dir / "dataset" / "actions.ndjson", ds, model, alpha));
    report["consistency"] = consistency_section(build_consistency_report(
        profiles, manifest, ctx.config.out_dir / "dataset" / "actions.ndjson", segment_len, flag_floor));

    std::filesystem::create_directories(ctx.config.out_dir / "eval");
    atomic_write_file(ctx.config.out_dir / "eval" / "report.json", report.dump(1) + "\n");
    fmt::print("eval report written for task '{}'\n", task);
    return std::vector<std::string>{"eval/report.json"};
  });
}

namespace {

void append_line(std::string& text, const std::string& line) { text += line + "\n"; }

// A handful of structural checks; cmd_report exits non-zero if any fail.
std::vector<std::string> report_assertions(const json& consolidated) {
  std::vector<std::string> failures;
  auto check_pct = [&](const json& j, const std::string& where) {
    double v = j.get<double>();
    if (!(v >= 0.0 && v <= 100.0)) failures.push_back(fmt::format("{} out of [0,100]: {}", where, v));
  };
  if (consolidated.contains("tasks"))
    for (const auto& [name, rep] : consolidated.at("tasks").items()) {
      for (const char* section : {"site_metrics", "persona_metrics"})
        if (rep.contains(section)) {
          check_pct(rep.at(section).at("accuracy"), name + std::string(".") + section + ".accuracy");
          check_pct(rep.at(section).at("macro_f1"), name + std::string(".") + section + ".macro_f1");
        }
      if (rep.contains("ow_report")) {
        const json& ow = rep.at("ow_report");
        double recall = ow.at("ow_recall").get<double>();
        double misattr = ow.at("misattr_at_ow").get<double>();
        if (std::abs(misattr - (100.0 - recall)) > 0.1001)
          failures.push_back(fmt::format("{}: misattr_at_ow {} does not match 100-recall {}", name, misattr,
                                         100.0 - recall));
      }
    }
  return failures;
}

}  // namespace

int cmd_report(Ctx& ctx) {
  RunManifest manifest = open_manifest(ctx);

  // Expected steps derive from the config's sections.
  std::vector<std::string> expected{"simulate", "split"};
  for (const TaskSection& t : ctx.config.tasks) expected.push_back("train:" + t.name);
  if (ctx.config.probe) expected.push_back("probe");
  if (ctx.config.sweep) expected.push_back("sweep");
  if (ctx.config.scaling) expected.push_back("scaling");
  if (ctx.config.eval) expected.push_back("eval");

  std::vector<std::string> missing;
  for (const std::string& step : expected)
    if (!manifest.can_skip(step)) missing.push_back(step);
  if (!missing.empty()) {
    std::string list;
    for (const std::string& m : missing) list += (list.empty() ? "" : ", ") + m;
    fail("cli.incomplete_run", "missing or stale steps: {}", list);
  }

  json consolidated;
  consolidated["config_hash"] = to_hex(ctx.config.hash());
  json steps = json::array();
  for (const std::string& s : expected) steps.push_back(s);
  consolidated["steps"] = std::move(steps);

  auto read_json = [&](const std::filesystem::path& rel) {
    json j = json::parse(read_file(ctx.config.out_dir / rel), nullptr, false);
    if (j.is_discarded()) fail("cli.bad_artifact", "{} is not valid JSON", rel.string());
    return j;
  };

  consolidated["dataset_counts"] = read_json("dataset/counts.json");
  json task_reports = json::object();
  for (const TaskSection& t : ctx.config.tasks)
    task_reports[t.name] = read_json("train/" + t.name + "/report.json");
  consolidated["tasks"] = std::move(task_reports);
  if (ctx.config.probe) consolidated["probe"] = read_json("probe/probe.json");
  if (ctx.config.sweep) consolidated["sweep_csv"] = read_file(ctx.config.out_dir / "sweep.csv");
  if (ctx.config.scaling) consolidated["scaling_csv"] = read_file(ctx.config.out_dir / "scaling.csv");
  if (ctx.config.eval) consolidated["eval"] = read_json("eval/report.json");

  std::vector<std::string> failures = report_assertions(consolidated);
  consolidated["assertions"] = {{"passed", failures.empty()}, {"failures", failures}};

  // Human-readable rendering.
  std::string text;
  append_line(text, "== run report ==");
  append_line(text, "config_hash: " + to_hex(ctx.config.hash()));
  for (const auto& [name, rep] : consolidated.at("tasks").items()) {
    append_line(text, "task " + name + ":");
    if (rep.contains("site_metrics"))
      append_line(text, fmt::format("  site     acc={:>5} macro_f1={:>5}",
                                    rep.at("site_metrics").at("accuracy").dump(),
                                    rep.at("site_metrics").at("macro_f1").dump()));
    if (rep.contains("persona_metrics"))
      append_line(text, fmt::format("  persona  acc={:>5} macro_f1={:>5}",
                                    rep.at("persona_metrics").at("accuracy").dump(),
                                    rep.at("persona_metrics").at("macro_f1").dump()));
    if (rep.contains("ow_report"))
      append_line(text, fmt::format("  ow       misattr={} top3_share={}",
                                    rep.at("ow_report").at("misattr_at_ow").dump(),
                                    rep.at("ow_report").at("top3_share").dump()));
  }
  if (consolidated.contains("probe") && consolidated.at("probe").contains("gap"))
    append_line(text, "probe gap: " + consolidated.at("probe").at("gap").dump());
  if (consolidated.contains("sweep_csv")) append_line(text, "sweep:\n" + consolidated.at("sweep_csv").get<std::string>());
  if (consolidated.contains("scaling_csv"))
    append_line(text, "scaling:\n" + consolidated.at("scaling_csv").get<std::string>());
  append_line(text, failures.empty() ? "assertions: all passed" : "assertions: FAILURES");
  for (const std::string& f : failures) append_line(text, "  " + f);

  std::filesystem::create_directories(ctx.config.out_dir / "report");
  atomic_write_file(ctx.config.out_dir / "report" / "report.json", consolidated.dump(1) + "\n");
  atomic_write_file(ctx.config.out_dir / "report" / "report.txt", text);
  fmt::print("{}", text);

  RunManifest done = open_manifest(ctx);
  done.begin("report");
  done.complete("report", {"report/report.json", "report/report.txt"}, 0.0);
  return failures.empty() ? 0 : 1;
}

}  // namespace pfp::cli
