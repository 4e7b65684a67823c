// SPDX-License-Identifier: Apache-2.0
#include "pfp/cli/report.hpp"

#include <cmath>
#include <fstream>

#include "pfp/common/error.hpp"
#include "pfp/sim/summary.hpp"

namespace pfp::cli {

namespace {

double round4(double v) { return std::round(v * 10000.0) / 10000.0; }

using nlohmann::json;

}  // namespace

json classification_section(const metrics::ConfusionMatrix& cm) {
  json j;
  j["accuracy"] = metrics::round1(metrics::accuracy_pct(cm));
  j["macro_f1"] = metrics::round1(metrics::macro_f1_pct(cm));
  j["windows"] = cm.total();
  json per_class = json::object();
  for (size_t c = 0; c < cm.k(); ++c) {
    const double tp = static_cast<double>(cm.count(c, c));
    const double row = static_cast<double>(cm.row_sum(c));
    const double col = static_cast<double>(cm.col_sum(c));
    const double p = col > 0 ? tp / col : 0.0;
    const double r = row > 0 ? tp / row : 0.0;
    const double f1 = (p + r) > 0 ? 2.0 * p * r / (p + r) : 0.0;
    per_class[cm.labels()[c]] = metrics::round1(100.0 * f1);
  }
  j["per_class_f1"] = std::move(per_class);
  return j;
}

json ow_section(const metrics::OwReport& ow) {
  json j;
  j["ow_precision"] = metrics::round1(ow.ow_precision);
  j["ow_recall"] = metrics::round1(ow.ow_recall);
  j["ow_f1"] = metrics::round1(ow.ow_f1);
  j["misattr_at_ow"] = metrics::round1(ow.misattr_at_ow);
  j["top3_share"] = metrics::round1(ow.top3_share);
  j["top3_personas"] = ow.top3_personas;
  return j;
}

json diversity_section(const metrics::DiversityReport& d) {
  json j;
  j["alpha"] = d.alpha;
  j["action_count"] = d.action_count;
  j["encoder_provenance"] = d.encoder_provenance;
  json rows = json::array();
  for (const metrics::PersonaDiversity& p : d.personas) {
    json r;
    r["persona"] = p.persona;
    r["entropy_nats"] = round4(p.entropy_nats);
    r["entropy_normalized"] = round4(p.entropy_normalized);
    json cov = json::object();
    for (const auto& [site, c] : p.coverage_by_site) cov[site] = round4(c);
    r["coverage_by_site"] = std::move(cov);
    r["mean_coverage"] = round4(p.mean_coverage);
    r["d_act"] = round4(p.d_act_score);
    r["d_pkt"] = round4(p.d_pkt_spread);
    rows.push_back(std::move(r));
  }
  j["personas"] = std::move(rows);
  return j;
}

json consistency_section(const metrics::ConsistencyReport& c) {
  json j;
  j["flag_floor"] = c.flag_floor;
  json rows = json::array();
  for (const metrics::PersonaConsistency& p : c.personas) {
    json r;
    r["persona"] = p.persona;
    r["mean_score"] = round4(p.mean_score);
    r["segments"] = p.segments.size();
    size_t flagged = 0;
    for (const metrics::SegmentScore& s : p.segments) flagged += s.flagged ? 1 : 0;
    r["flagged_segments"] = flagged;
    rows.push_back(std::move(r));
  }
  j["personas"] = std::move(rows);
  return j;
}

json model_report(const tasks::TrainedModel& model, const tasks::LoadedDataset& ds) {
  tasks::EvalResult ev = tasks::evaluate_model(model, ds, ds.test);
  json j;
  j["task"] = tasks::task_kind_name(model.kind);
  j["openness"] = tasks::openness_name(model.openness);
  if (model.scope_site) j["scope_site"] = ds.labels.sites.at(*model.scope_site);
  if (model.kind == tasks::TaskKind::joint) j["lambda"] = model.lambda;
  j["best_epoch"] = model.best_epoch;
  if (ev.site_cm) j["site_metrics"] = classification_section(*ev.site_cm);
  if (ev.persona_cm) {
    j["persona_metrics"] = classification_section(*ev.persona_cm);
    if (model.openness == tasks::Openness::open_world && ev.persona_cm->row_sum(ev.persona_cm->k() - 1) > 0)
      j["ow_report"] = ow_section(metrics::ow_report(*ev.persona_cm));
  }
  return j;
}

namespace {

struct ActionLogIndex {
  std::map<std::string, std::vector<sim::ActionEvent>> by_session;
};

ActionLogIndex read_action_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("io.open_failed", "cannot open action log {}", path.string());
  ActionLogIndex index;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) fail("sim.bad_action_log", "{}:{}: malformed line", path.string(), line_no);
    sim::ActionEvent e;
    e.step = j.at("step").get<int32_t>();
    e.action = sim::action_from_name(j.at("action").get<std::string>());
    e.page_type = sim::page_type_from_name(j.at("page").get<std::string>());
    e.dwell_ms = j.at("dwell_ms").get<int64_t>();
    index.by_session[j.at("sess").get<std::string>()].push_back(e);
  }
  return index;
}

}  // namespace

metrics::DiversityReport build_diversity_report(const ResolvedProfiles& profiles,
                                                const trace::DatasetManifest& manifest,
                                                const std::filesystem::path& actions_path,
                                                const tasks::LoadedDataset& ds,
                                                const tasks::TrainedModel& model, double alpha) {
  const ActionLogIndex actions = read_action_log(actions_path);
  std::map<std::string, const sim::SiteSpec*> sites;
  for (const sim::SiteSpec& s : profiles.sites) sites[s.id] = &s;

  metrics::DiversityReport report;
  report.alpha = alpha;
  report.action_count = sim::kActionCount;
  report.encoder_provenance = std::string(tasks::task_kind_name(model.kind)) + "_encoder";

  // Embeddings of the test split, grouped by persona label.
  std::vector<float> z = tasks::embed_part(model.encoder, ds, ds.test);
  const int64_t d = model.encoder.embed_dim();
  std::map<uint16_t, std::vector<double>> emb_by_persona;
  for (int64_t i = 0; i < ds.test.size(); ++i) {
    std::vector<double>& dst = emb_by_persona[ds.test.windows[static_cast<size_t>(i)].persona_label];
    for (int64_t k = 0; k < d; ++k) dst.push_back(static_cast<double>(z[static_cast<size_t>(i * d + k)]));
  }

  for (uint16_t label = 0; label < ds.labels.persona_class_count(); ++label) {
    const std::string name = ds.labels.persona_name(label);
    metrics::PersonaDiversity pd;
    pd.persona = name;

    std::array<uint64_t, sim::kActionCount> counts{};
    std::map<std::string, std::set<std::string>> visited_by_site;
    for (const trace::SessionEntry& sess : manifest.sessions) {
      if (sess.persona != name) continue;
      auto it = actions.by_session.find(sess.sess);
      if (it == actions.by_session.end()) continue;
      for (const sim::ActionEvent& e : it->second) {
        counts[static_cast<size_t>(e.action)] += 1;
        visited_by_site[sess.site].insert(sim::page_type_name(e.page_type));
      }
    }
    pd.entropy_nats = metrics::action_entropy(counts);
    pd.entropy_normalized = pd.entropy_nats / std::log(static_cast<double>(sim::kActionCount));

    double cov_sum = 0.0;
    size_t cov_n = 0;
    for (const auto& [site_id, visited] : visited_by_site) {
      auto sit = sites.find(site_id);
      if (sit == sites.end()) fail("config.unknown_id", "manifest site '{}' missing from profiles", site_id);
      std::set<std::string> all;
      for (sim::PageType p : sit->second->page_types) all.insert(sim::page_type_name(p));
      double c = metrics::coverage(visited, all);
      pd.coverage_by_site[site_id] = c;
      cov_sum += c;
      ++cov_n;
    }
    pd.mean_coverage = cov_n > 0 ? cov_sum / static_cast<double>(cov_n) : 0.0;
    pd.d_act_score = metrics::d_act(pd.entropy_nats, sim::kActionCount, pd.mean_coverage, alpha);

    auto eit = emb_by_persona.find(label);
    if (eit != emb_by_persona.end() && !eit->second.empty())
      pd.d_pkt_spread = metrics::d_pkt(eit->second, static_cast<size_t>(d));
    report.personas.push_back(std::move(pd));
  }
  return report;
}

metrics::ConsistencyReport build_consistency_report(const ResolvedProfiles& profiles,
                                                    const trace::DatasetManifest& manifest,
                                                    const std::filesystem::path& actions_path,
                                                    int64_t segment_len, double flag_floor) {
  const ActionLogIndex actions = read_action_log(actions_path);
  std::map<std::string, std::string> texts;
  std::map<std::string, std::vector<std::string>> segments;
  for (const sim::PersonaSpec& p : profiles.personas) texts[p.id] = sim::describe_persona(p);

  for (const trace::SessionEntry& sess : manifest.sessions) {
    if (!texts.contains(sess.persona)) continue;  // OW sessions have no canonical description
    auto it = actions.by_session.find(sess.sess);
    if (it == actions.by_session.end()) continue;
    for (std::string& seg : sim::summarize_trajectory(it->second, segment_len))
      segments[sess.persona].push_back(std::move(seg));
  }
  return metrics::consistency_report(texts, segments, flag_floor);
}

}  // namespace pfp::cli
