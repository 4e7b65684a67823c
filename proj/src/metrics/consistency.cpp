// SPDX-License-Identifier: Apache-2.0
#include "pfp/metrics/consistency.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "pfp/common/error.hpp"

namespace pfp::metrics {

namespace {

std::map<std::string, uint64_t> token_counts(std::string_view text) {
  std::map<std::string, uint64_t> counts;
  std::string tok;
  for (char ch : text) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      tok.push_back(static_cast<char>(std::tolower(c)));
    } else if (!tok.empty()) {
      counts[tok] += 1;
      tok.clear();
    }
  }
  if (!tok.empty()) counts[tok] += 1;
  return counts;
}

}  // namespace

double consistency_score(std::string_view persona_text, std::string_view trajectory_text) {
  auto a = token_counts(persona_text);
  auto b = token_counts(trajectory_text);
  if (a.empty() || b.empty()) fail("metrics.empty_tokens", "consistency score over an empty token set");
  if (a == b) return 1.0;

  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [tok, cnt] : a) {
    na += static_cast<double>(cnt) * static_cast<double>(cnt);
    auto it = b.find(tok);
    if (it != b.end()) dot += static_cast<double>(cnt) * static_cast<double>(it->second);
  }
  for (const auto& [tok, cnt] : b) nb += static_cast<double>(cnt) * static_cast<double>(cnt);
  double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, 0.0, 1.0);
}

ConsistencyReport consistency_report(const std::map<std::string, std::string>& persona_texts,
                                     const std::map<std::string, std::vector<std::string>>& segments,
                                     double flag_floor, ScorerFn scorer) {
  ConsistencyReport report;
  report.flag_floor = flag_floor;
  for (const auto& [persona, text] : persona_texts) {
    auto it = segments.find(persona);
    if (it == segments.end() || it->second.empty())
      fail("metrics.no_segments", "persona {} has no trajectory segments", persona);
    PersonaConsistency pc;
    pc.persona = persona;
    double sum = 0.0;
    for (const std::string& seg : it->second) {
      SegmentScore s;
      s.score = scorer(text, seg);
      s.flagged = s.score < flag_floor;
      sum += s.score;
      pc.segments.push_back(s);
    }
    pc.mean_score = sum / static_cast<double>(pc.segments.size());
    report.personas.push_back(std::move(pc));
  }
  return report;
}

}  // namespace pfp::metrics
