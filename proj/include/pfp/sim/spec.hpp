// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pfp/trace/types.hpp"

namespace pfp::sim {

// The finite action set a browsing policy chooses from each step.
enum class Action : uint8_t { search, click, scroll, navigate, dwell, tab_open, exit_page };
inline constexpr size_t kActionCount = 7;

const char* action_name(Action a);
Action action_from_name(const std::string& name);

// Abstract page states; a site exposes an ordered subset (>= 2, homepage
// first) and the simulator never leaves that subset.
enum class PageType : uint8_t { homepage, search_results, detail, comments, feed };
inline constexpr size_t kPageTypeCount = 5;

const char* page_type_name(PageType p);
PageType page_type_from_name(const std::string& name);

// Numeric behavioral profile of one persona. The knobs stand in for the
// profile / session-pattern / preference text of a scripted browser persona:
// what it tends to do, how long it lingers, how deep it scrolls, whether it
// searches or follows recommendations, and how much it fetches per action.
struct PersonaSpec {
  std::string id;    // "P1".."P15" for canonical presets, free-form otherwise
  std::string name;  // display name, e.g. "Time-Pressed Tech Professional"
  std::array<double, kActionCount> action_weights{};
  double dwell_med_ms = 1000.0;
  double dwell_sigma = 0.6;
  double scroll_depth_mean = 2.0;  // lazy-load fetches per scroll
  double search_bias = 0.5;        // 1 = always search, 0 = follow recommendations
  double patience = 1.0;           // session-length multiplier
  double burst_scale = 1.0;        // multiplier on fetched object sizes

  void validate() const;
};

struct ObjectSizeComponent {
  double weight = 1.0;
  double median_bytes = 20000.0;
  double sigma = 0.5;
};

struct SiteSpec {
  std::string id;
  std::vector<PageType> page_types;  // ordered, first entry is the entry page
  std::map<PageType, std::vector<ObjectSizeComponent>> object_size_dist;
  double rtt_ms = 50.0;
  double ad_burst_rate = 0.1;  // background bursts per second of dwell
  int64_t mtu = 1500;

  void validate() const;
  bool has_page(PageType p) const;
};

// One decision step as logged by the simulator.
struct ActionEvent {
  int32_t step = 0;
  Action action = Action::dwell;
  PageType page_type = PageType::homepage;  // page reached after the action
  int64_t dwell_ms = 0;
};

struct SessionTrace {
  std::string session_id;
  std::string site_id;
  std::string persona_id;
  std::vector<trace::PacketRecord> records;
  std::vector<ActionEvent> actions;
  uint64_t seed = 0;
};

// Profile files: {"version": N, "personas": [...]} / {"version": N, "sites": [...]}.
std::vector<PersonaSpec> load_personas(const std::filesystem::path& path);
std::vector<SiteSpec> load_sites(const std::filesystem::path& path);

PersonaSpec persona_from_json_text(const std::string& text);

std::string action_log_line(const std::string& sess, const ActionEvent& e);

}  // namespace pfp::sim
