// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace pfp::metrics {

// Alignment score in [0, 1] between two texts: cosine similarity of
// lowercase word-token frequency vectors. Deterministic stand-in for an
// embedding-based scorer; the ScorerFn seam below keeps it swappable.
double consistency_score(std::string_view persona_text, std::string_view trajectory_text);

using ScorerFn = double (*)(std::string_view, std::string_view);

struct SegmentScore {
  double score = 0.0;
  bool flagged = false;  // below the configured floor; kept, never dropped
};

struct PersonaConsistency {
  std::string persona;
  double mean_score = 0.0;
  std::vector<SegmentScore> segments;
};

struct ConsistencyReport {
  double flag_floor = 0.0;
  std::vector<PersonaConsistency> personas;
};

// Per-persona mean of per-segment scores. `segments` maps persona id to its
// trajectory-segment summaries; every persona present must have at least one
// segment. Segments scoring below flag_floor are flagged but still counted.
ConsistencyReport consistency_report(const std::map<std::string, std::string>& persona_texts,
                                     const std::map<std::string, std::vector<std::string>>& segments,
                                     double flag_floor, ScorerFn scorer = &consistency_score);

}  // namespace pfp::metrics
