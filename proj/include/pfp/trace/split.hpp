// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <vector>

#include "pfp/trace/types.hpp"

namespace pfp::trace {

struct SessionLabel {
  std::string session_id;
  std::string site;
  std::string persona;
};

// Session-level split, stratified by (site, persona): within each stratum the
// sessions are shuffled (seeded) and allocated by largest remainder, so the
// realized counts are within one session of the ratio targets. All windows of
// a session inherit its part. Deterministic for a fixed seed.
SplitAssignment assign_splits(const std::vector<SessionLabel>& sessions, std::array<double, 3> ratios,
                              uint64_t seed);

std::string split_to_json(const SplitAssignment& split);
SplitAssignment split_from_json(const std::string& text);

}  // namespace pfp::trace
