// SPDX-License-Identifier: Apache-2.0
#include "pfp/sim/summary.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "pfp/common/error.hpp"

namespace pfp::sim {

const char* dwell_bucket(int64_t dwell_ms) {
  if (dwell_ms < 2000) return "short";
  if (dwell_ms <= 8000) return "medium";
  return "long";
}

std::vector<std::string> summarize_trajectory(std::span<const ActionEvent> actions, int64_t segment_len) {
  if (actions.empty()) fail("sim.empty_actions", "cannot summarize an empty action log");
  if (segment_len < 5 || segment_len > 10)
    fail("sim.bad_segment_len", "segment length must be in [5,10], got {}", segment_len);

  std::vector<std::string> segments;
  for (size_t start = 0; start < actions.size(); start += static_cast<size_t>(segment_len)) {
    size_t end = std::min(actions.size(), start + static_cast<size_t>(segment_len));
    std::string text;
    for (size_t i = start; i < end; ++i) {
      const ActionEvent& e = actions[i];
      if (!text.empty()) text += "; ";
      text += fmt::format("{} on {} with {} dwell", action_name(e.action), page_type_name(e.page_type),
                          dwell_bucket(e.dwell_ms));
    }
    segments.push_back(std::move(text));
  }
  return segments;
}

std::string describe_persona(const PersonaSpec& persona) {
  // Two most-weighted actions, ties toward the lower index.
  std::array<size_t, kActionCount> order;
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return persona.action_weights[a] > persona.action_weights[b]; });

  const char* depth = persona.scroll_depth_mean < 2.0   ? "shallow"
                      : persona.scroll_depth_mean < 5.0 ? "moderate"
                                                        : "deep";
  const char* drive = persona.search_bias >= 0.6   ? "search"
                      : persona.search_bias <= 0.4 ? "recommendations"
                                                   : "search and recommendations";
  const char* stamina = persona.patience >= 0.75 ? "long" : persona.patience >= 0.4 ? "medium" : "short";

  return fmt::format("{} favors {} and {} actions with {} dwell, {} scrolling, relies on {}, {} sessions",
                     persona.name.empty() ? persona.id : persona.name,
                     action_name(static_cast<Action>(order[0])), action_name(static_cast<Action>(order[1])),
                     dwell_bucket(static_cast<int64_t>(persona.dwell_med_ms)), depth, drive, stamina);
}

}  // namespace pfp::sim
