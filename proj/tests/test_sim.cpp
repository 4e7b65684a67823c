// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <functional>
#include <numeric>

#include "pfp/common/error.hpp"
#include "pfp/common/fsio.hpp"
#include "pfp/sim/dataset.hpp"
#include "pfp/sim/session.hpp"
#include "pfp/sim/summary.hpp"
#include "pfp/trace/parse.hpp"
#include "pfp/trace/windows.hpp"

using namespace pfp;
using namespace pfp::sim;

namespace {

std::string err_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

PersonaSpec base_persona(const std::string& id = "T1") {
  PersonaSpec p;
  p.id = id;
  p.name = "Test Persona";
  p.action_weights = {1.0, 1.5, 1.5, 1.0, 1.0, 0.3, 0.2};  // Search..Exit
  p.dwell_med_ms = 1000;
  p.dwell_sigma = 0.5;
  p.scroll_depth_mean = 2.0;
  p.search_bias = 0.5;
  p.patience = 1.0;
  p.burst_scale = 1.0;
  return p;
}

SiteSpec base_site(const std::string& id = "S1", double object_median = 15000, double sigma = 0.5) {
  SiteSpec s;
  s.id = id;
  s.page_types = {PageType::homepage, PageType::search_results, PageType::detail, PageType::comments,
                  PageType::feed};
  for (PageType p : s.page_types) s.object_size_dist[p] = {{1.0, object_median, sigma}};
  s.rtt_ms = 20;
  s.ad_burst_rate = 0.0;
  s.mtu = 1500;
  return s;
}

int64_t gap_sum_mean_per_window(const SessionTrace& t, int64_t L) {
  auto gaps = trace::compute_gaps(t.records);
  auto windows = trace::extract_windows(t.records, gaps, L, 0, 0);
  if (windows.empty()) return 0;
  int64_t total = 0;
  for (const auto& w : windows) total += std::accumulate(w.gaps.begin(), w.gaps.end(), int64_t{0});
  return total / static_cast<int64_t>(windows.size());
}

}  // namespace

TEST_CASE("packetize: full chunks plus remainder") {
  CHECK(packetize(3000, 1500) == std::vector<int64_t>{1500, 1500});
  CHECK(packetize(1, 1500) == std::vector<int64_t>{1});
  CHECK(packetize(3100, 1500) == std::vector<int64_t>{1500, 1500, 100});
  CHECK(packetize(1500, 1500) == std::vector<int64_t>{1500});
  CHECK(err_code([] { packetize(0, 1500); }) == "sim.bad_object");
}

TEST_CASE("emit_action_traffic: request is positive, responses negative and mtu-bounded") {
  PersonaSpec p = base_persona();
  SiteSpec s = base_site("S1", 3000, 0.0);  // constant 3000-byte objects
  Rng rng(4);
  uint64_t t_us = 0;
  std::vector<trace::PacketRecord> out;
  ActionEvent click{1, Action::click, PageType::detail, 500};
  emit_action_traffic(click, s, p, "sess", 0, &t_us, rng, &out);
  REQUIRE(out.size() == 3);  // request + 2 full-mtu chunks
  CHECK(out[0].signed_len >= 100);
  CHECK(out[0].signed_len <= 800);
  CHECK(out[1].signed_len == -1500);
  CHECK(out[2].signed_len == -1500);
  for (size_t i = 1; i < out.size(); ++i) CHECK(out[i].ts_us >= out[i - 1].ts_us);
}

TEST_CASE("emit_action_traffic: one-byte object gives one one-byte response") {
  PersonaSpec p = base_persona();
  SiteSpec s = base_site("S1", 1, 0.0);
  Rng rng(4);
  uint64_t t_us = 0;
  std::vector<trace::PacketRecord> out;
  ActionEvent nav{1, Action::navigate, PageType::feed, 500};
  emit_action_traffic(nav, s, p, "sess", 0, &t_us, rng, &out);
  REQUIRE(out.size() == 2);
  CHECK(out[1].signed_len == -1);
}

TEST_CASE("simulate_session: byte-identical for identical inputs") {
  PersonaSpec p = base_persona();
  SiteSpec s = base_site();
  s.ad_burst_rate = 0.4;
  SessionTrace a = simulate_session(p, s, "sess-0", 77, 40);
  SessionTrace b = simulate_session(p, s, "sess-0", 77, 40);
  CHECK(trace::format_trace(a.records) == trace::format_trace(b.records));
  REQUIRE(a.actions.size() == b.actions.size());
  for (size_t i = 0; i < a.actions.size(); ++i) {
    CHECK(a.actions[i].action == b.actions[i].action);
    CHECK(a.actions[i].dwell_ms == b.actions[i].dwell_ms);
  }
  SessionTrace c = simulate_session(p, s, "sess-0", 78, 40);
  CHECK(trace::format_trace(a.records) != trace::format_trace(c.records));
}

TEST_CASE("simulate_session: effective steps follow ceil(budget * patience)") {
  PersonaSpec full = base_persona();
  full.patience = 1.0;
  PersonaSpec half = base_persona();
  half.patience = 0.5;
  SiteSpec s = base_site();
  SessionTrace a = simulate_session(full, s, "x", 5, 100);
  SessionTrace b = simulate_session(half, s, "x", 5, 100);
  CHECK(a.actions.size() == 100);
  CHECK(b.actions.size() == 50);
  CHECK(b.actions.size() * 2 <= a.actions.size());

  PersonaSpec tiny = base_persona();
  tiny.patience = 0.0;
  CHECK(simulate_session(tiny, s, "x", 5, 100).actions.size() == 1);  // at least one step
}

TEST_CASE("simulate_session: direction soundness across a whole session") {
  PersonaSpec p = base_persona();
  SiteSpec s = base_site();
  s.ad_burst_rate = 0.5;
  SessionTrace t = simulate_session(p, s, "sess", 99, 60);
  size_t up = 0, down = 0;
  for (const auto& r : t.records) {
    CHECK(r.signed_len != 0);
    if (r.signed_len > 0) {
      // Requests are small (no payload uploads in this model).
      CHECK(r.signed_len <= 800);
      ++up;
    } else {
      CHECK(-r.signed_len <= s.mtu);
      ++down;
    }
  }
  CHECK(up > 0);
  CHECK(down > up);  // responses dominate by construction
  // Timestamps non-decreasing within each connection.
  CHECK_NOTHROW(trace::compute_gaps(t.records));
}

TEST_CASE("simulate_session: configuration errors") {
  PersonaSpec p = base_persona();
  SiteSpec s = base_site();
  PersonaSpec dead = p;
  dead.action_weights.fill(0.0);
  CHECK(err_code([&] { simulate_session(dead, s, "x", 1, 10); }) == "sim.bad_persona");
  CHECK(err_code([&] { simulate_session(p, s, "x", 1, 0); }) == "sim.bad_budget");
}

TEST_CASE("packetization oracle: fixed object sizes make burst lengths closed-form") {
  PersonaSpec p = base_persona();
  // Only full-page actions (Search/Click/Navigate/TabOpen): no lazy loads,
  // no partial-fetch scaling, so every response burst is one whole object.
  p.action_weights = {1.0, 2.0, 0.0, 1.0, 0.0, 0.5, 0.0};
  p.burst_scale = 1.0;
  SiteSpec s = base_site("S1", 4600, 0.0);  // every object exactly 4600 bytes
  s.ad_burst_rate = 0.0;
  SessionTrace t = simulate_session(p, s, "sess", 31, 50);

  // Walk bursts: a positive packet starts one; responses must then be
  // ceil(4600/1500) = 4 packets (3 full + 100-byte remainder).
  size_t i = 0;
  size_t bursts = 0;
  while (i < t.records.size()) {
    REQUIRE(t.records[i].signed_len > 0);
    size_t j = i + 1;
    std::vector<int64_t> burst;
    while (j < t.records.size() && t.records[j].signed_len < 0) {
      burst.push_back(-t.records[j].signed_len);
      ++j;
    }
    CHECK(burst == std::vector<int64_t>{1500, 1500, 1500, 100});
    ++bursts;
    i = j;
  }
  CHECK(bursts == t.actions.size());
}

TEST_CASE("separability: 4x dwell gap yields >= 2x window gap sums") {
  PersonaSpec slow = base_persona("slow");
  slow.dwell_med_ms = 4000;
  PersonaSpec fast = base_persona("fast");
  fast.dwell_med_ms = 1000;  // differs only in dwell_med_ms
  SiteSpec s = base_site("S1", 15000, 0.3);
  s.rtt_ms = 20;

  const int64_t L = 200;
  int64_t slow_sum = 0, fast_sum = 0, n = 0;
  for (uint64_t seed = 0; seed < 6; ++seed) {
    slow_sum += gap_sum_mean_per_window(simulate_session(slow, s, "a", 1000 + seed, 120), L);
    fast_sum += gap_sum_mean_per_window(simulate_session(fast, s, "b", 2000 + seed, 120), L);
    ++n;
  }
  CHECK(slow_sum >= 2 * fast_sum);
}

TEST_CASE("summarize_trajectory: content, tiling, determinism, and errors") {
  std::vector<ActionEvent> log;
  log.push_back({1, Action::search, PageType::search_results, 12000});
  for (int i = 2; i <= 23; ++i)
    log.push_back({i, Action::scroll, PageType::feed, 500 + i});

  auto segments = summarize_trajectory(log, 5);
  CHECK(segments.size() == 5);  // 4 full + 1 partial
  CHECK(segments[0].find("Search") != std::string::npos);
  CHECK(segments[0].find("search_results") != std::string::npos);
  CHECK(segments[0].find("long") != std::string::npos);

  auto again = summarize_trajectory(log, 5);
  CHECK(segments == again);

  CHECK(err_code([&] { summarize_trajectory(log, 4); }) == "sim.bad_segment_len");
  CHECK(err_code([&] { summarize_trajectory(log, 11); }) == "sim.bad_segment_len");
  std::vector<ActionEvent> empty;
  CHECK(err_code([&] { summarize_trajectory(empty, 5); }) == "sim.empty_actions");
}

TEST_CASE("dwell buckets") {
  CHECK(std::string(dwell_bucket(1999)) == "short");
  CHECK(std::string(dwell_bucket(2000)) == "medium");
  CHECK(std::string(dwell_bucket(8000)) == "medium");
  CHECK(std::string(dwell_bucket(8001)) == "long");
}

TEST_CASE("describe_persona shares vocabulary with summaries") {
  PersonaSpec p = base_persona();
  p.action_weights[static_cast<size_t>(Action::search)] = 5.0;
  p.dwell_med_ms = 12000;
  std::string text = describe_persona(p);
  CHECK(text.find("Search") != std::string::npos);
  CHECK(text.find("long") != std::string::npos);
}

TEST_CASE("canonical preset file carries the fifteen named personas") {
  auto personas = load_personas(std::filesystem::path(PFP_SOURCE_DIR) / "config" / "personas_canonical.json");
  REQUIRE(personas.size() == 15);
  CHECK(personas[0].id == "P1");
  CHECK(personas[0].name == "Time-Pressed Tech Professional");
  CHECK(personas[14].id == "P15");
  CHECK(personas[14].name == "Curious Generalist Explorer");
  for (size_t i = 0; i < personas.size(); ++i) {
    CHECK(personas[i].id == "P" + std::to_string(i + 1));
    CHECK(!personas[i].name.empty());
  }
}

TEST_CASE("build_dataset: targets, balance, and determinism") {
  const auto dir = std::filesystem::temp_directory_path() / "pfp_build_test";
  std::filesystem::remove_all(dir);

  std::vector<SiteSpec> sites{base_site("sA", 12000, 0.4), base_site("sB", 30000, 0.5)};
  std::vector<PersonaSpec> canon{base_persona("Pa"), base_persona("Pb"), base_persona("Pc")};
  canon[1].dwell_med_ms = 4000;
  canon[2].scroll_depth_mean = 5.0;
  std::vector<PersonaSpec> ow{base_persona("Oa"), base_persona("Ob")};
  ow[0].dwell_med_ms = 2500;

  DatasetBuildConfig cfg;
  cfg.out_dir = dir;
  cfg.windows_target = 50;
  cfg.window_len = 200;
  cfg.step_budget = 40;
  cfg.seed = 9;
  cfg.has_ow = true;

  BuildResult result = build_dataset(sites, canon, ow, cfg);
  REQUIRE(result.counts.size() == 2 * 4);  // (3 canonical + OW) per site
  for (const StratumCount& c : result.counts) {
    CHECK(c.windows >= 50);
    // OW balance: within 10% of the canonical target.
    CHECK(c.windows <= 55);
  }
  CHECK(result.manifest.label_space.personas == std::vector<std::string>{"Pa", "Pb", "Pc"});
  CHECK(result.manifest.label_space.has_ow);

  // Windows recomputed from the stored traces match the reported counts.
  for (const StratumCount& c : result.counts) {
    auto records = trace::parse_trace_file(dir / "traces" / (c.site + "__" + c.persona + ".ndjson"));
    auto gaps = trace::compute_gaps(records);
    auto windows = trace::extract_windows(records, gaps, cfg.window_len, 0, 0);
    CHECK(static_cast<int64_t>(windows.size()) == c.windows);
  }

  // Determinism: rebuilding into a second directory gives identical bytes.
  const auto dir2 = std::filesystem::temp_directory_path() / "pfp_build_test2";
  std::filesystem::remove_all(dir2);
  DatasetBuildConfig cfg2 = cfg;
  cfg2.out_dir = dir2;
  build_dataset(sites, canon, ow, cfg2);
  CHECK(read_file(dir / "manifest.json") == read_file(dir2 / "manifest.json"));
  CHECK(read_file(dir / "actions.ndjson") == read_file(dir2 / "actions.ndjson"));
  CHECK(read_file(dir / "traces" / "sA__Pa.ndjson") == read_file(dir2 / "traces" / "sA__Pa.ndjson"));

  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("build_dataset: has_ow=false emits no OW label; empty pool rejected") {
  const auto dir = std::filesystem::temp_directory_path() / "pfp_build_noow";
  std::filesystem::remove_all(dir);
  std::vector<SiteSpec> sites{base_site("sA")};
  std::vector<PersonaSpec> canon{base_persona("Pa"), base_persona("Pb")};

  DatasetBuildConfig cfg;
  cfg.out_dir = dir;
  cfg.windows_target = 10;
  cfg.window_len = 200;
  cfg.step_budget = 40;
  cfg.has_ow = false;
  BuildResult result = build_dataset(sites, canon, {}, cfg);
  CHECK_FALSE(result.manifest.label_space.has_ow);
  for (const auto& s : result.manifest.sessions) CHECK(s.persona != "OW");

  DatasetBuildConfig bad = cfg;
  bad.has_ow = true;
  CHECK(err_code([&] { build_dataset(sites, canon, {}, bad); }) == "sim.build_config");
  std::filesystem::remove_all(dir);
}

TEST_CASE("build_dataset: id collisions between pools are rejected") {
  std::vector<SiteSpec> sites{base_site("sA")};
  std::vector<PersonaSpec> canon{base_persona("Pa")};
  std::vector<PersonaSpec> ow{base_persona("Pa")};
  DatasetBuildConfig cfg;
  cfg.out_dir = std::filesystem::temp_directory_path() / "pfp_build_dup";
  CHECK(err_code([&] { build_dataset(sites, canon, ow, cfg); }) == "sim.build_config");
}
