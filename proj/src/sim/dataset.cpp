// SPDX-License-Identifier: Apache-2.0
#include "pfp/sim/dataset.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

#include "pfp/common/error.hpp"
#include "pfp/common/fsio.hpp"
#include "pfp/common/rng.hpp"
#include "pfp/sim/session.hpp"
#include "pfp/trace/parse.hpp"

namespace pfp::sim {

namespace {

// Windows a session will contribute: sum over connections of floor(n/L).
int64_t window_yield(const std::vector<trace::PacketRecord>& records, int64_t window_len) {
  int64_t total = 0;
  int64_t run = 0;
  uint32_t conn = 0;
  bool any = false;
  for (const trace::PacketRecord& r : records) {
    if (!any || r.connection_id != conn) {
      total += run / window_len;
      run = 0;
      conn = r.connection_id;
      any = true;
    }
    run += 1;
  }
  total += run / window_len;
  return total;
}

// Keeps exactly `needed` windows worth of packets (connections are
// contiguous in simulator output), cutting at a window boundary.
int64_t trim_to_windows(std::vector<trace::PacketRecord>& records, int64_t window_len, int64_t needed) {
  std::vector<trace::PacketRecord> kept;
  kept.reserve(records.size());
  int64_t got = 0;
  size_t i = 0;
  while (i < records.size() && got < needed) {
    size_t j = i;
    while (j < records.size() && records[j].connection_id == records[i].connection_id) ++j;
    const int64_t n = static_cast<int64_t>(j - i);
    const int64_t yield = n / window_len;
    if (yield <= needed - got) {
      kept.insert(kept.end(), records.begin() + i, records.begin() + j);
      got += yield;
      i = j;
    } else {
      const int64_t take = (needed - got) * window_len;
      kept.insert(kept.end(), records.begin() + i, records.begin() + i + take);
      got = needed;
    }
  }
  records = std::move(kept);
  return got;
}

class ActionLogWriter {
 public:
  explicit ActionLogWriter(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) fail("io.open_failed", "cannot open {} for writing", path.string());
  }
  void append(const SessionTrace& t) {
    for (const ActionEvent& e : t.actions) out_ << action_log_line(t.session_id, e) << "\n";
    if (!out_) fail("io.write_failed", "action log write failed");
  }

 private:
  std::ofstream out_;
};

}  // namespace

BuildResult build_dataset(const std::vector<SiteSpec>& sites, const std::vector<PersonaSpec>& canonical,
                          const std::vector<PersonaSpec>& ow_pool, const DatasetBuildConfig& cfg) {
  if (sites.empty()) fail("sim.build_config", "dataset needs at least one site");
  if (canonical.empty()) fail("sim.build_config", "dataset needs at least one canonical persona");
  if (cfg.windows_target < 1) fail("sim.build_config", "windows_target must be >= 1");
  if (cfg.window_len < 1) fail("sim.build_config", "window_len must be >= 1");
  if (cfg.has_ow && ow_pool.empty())
    fail("sim.build_config", "open-world label requested but the OW persona pool is empty");

  std::set<std::string> canon_ids;
  for (const PersonaSpec& p : canonical) {
    p.validate();
    if (!canon_ids.insert(p.id).second) fail("sim.build_config", "duplicate persona id {}", p.id);
  }
  for (const PersonaSpec& p : ow_pool) {
    p.validate();
    if (canon_ids.contains(p.id))
      fail("sim.build_config", "OW pool persona {} collides with a canonical persona", p.id);
  }
  for (const SiteSpec& s : sites) s.validate();

  std::filesystem::create_directories(cfg.out_dir / "traces");
  ActionLogWriter actions(cfg.out_dir / "actions.ndjson");

  BuildResult result;
  for (const SiteSpec& s : sites) result.manifest.label_space.sites.push_back(s.id);
  for (const PersonaSpec& p : canonical) result.manifest.label_space.personas.push_back(p.id);
  result.manifest.label_space.has_ow = cfg.has_ow;

  // One stratum = one (site, label) pair; OW cycles the pool variants.
  auto run_stratum = [&](const SiteSpec& site, const std::string& label,
                         const std::vector<const PersonaSpec*>& variants) {
    const std::string rel = fmt::format("traces/{}__{}.ndjson", site.id, label);
    std::ofstream trace_out(cfg.out_dir / rel, std::ios::binary | std::ios::trunc);
    if (!trace_out) fail("io.open_failed", "cannot open {} for writing", (cfg.out_dir / rel).string());

    StratumCount count{site.id, label, 0, 0};
    const int64_t max_sessions = cfg.windows_target * 50 + 200;
    int64_t budget = cfg.step_budget;
    for (int64_t ordinal = 0; count.windows < cfg.windows_target; ++ordinal) {
      if (ordinal >= max_sessions)
        fail("sim.stalled", "site {} label {}: {} sessions produced only {}/{} windows; raise step_budget",
             site.id, label, ordinal, count.windows, cfg.windows_target);
      const PersonaSpec& persona = *variants[static_cast<size_t>(ordinal) % variants.size()];
      const uint64_t session_seed = derive_seed(cfg.seed, fnv1a64(site.id), fnv1a64(label),
                                                static_cast<uint64_t>(ordinal));
      const std::string sess = fmt::format("{}-{}-{:04}", site.id, label, ordinal);
      SessionTrace t = simulate_session(persona, site, sess, session_seed, budget);
      int64_t got = window_yield(t.records, cfg.window_len);
      if (got == 0) {
        // Session shorter than one window (light persona on a thin site);
        // grow this stratum's budget and move on, leaving it out of the
        // manifest.
        if (budget < cfg.step_budget * 64) budget *= 2;
        continue;
      }
      if (count.windows + got > cfg.windows_target)
        got = trim_to_windows(t.records, cfg.window_len, cfg.windows_target - count.windows);
      trace_out << trace::format_trace(t.records);
      actions.append(t);
      result.manifest.sessions.push_back({sess, site.id, label, rel});
      count.windows += got;
      count.sessions += 1;
    }
    if (!trace_out) fail("io.write_failed", "trace write failed for {}", rel);
    result.counts.push_back(count);
  };

  for (const SiteSpec& site : sites) {
    for (const PersonaSpec& persona : canonical) run_stratum(site, persona.id, {&persona});
    if (cfg.has_ow) {
      std::vector<const PersonaSpec*> pool;
      for (const PersonaSpec& p : ow_pool) pool.push_back(&p);
      run_stratum(site, "OW", pool);
    }
  }

  trace::write_manifest(cfg.out_dir / "manifest.json", result.manifest);
  return result;
}

}  // namespace pfp::sim
