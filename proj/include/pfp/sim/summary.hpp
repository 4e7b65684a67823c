// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "pfp/sim/spec.hpp"

namespace pfp::sim {

// Dwell buckets used in summaries and persona descriptions:
// < 2 s short, 2-8 s medium, > 8 s long.
const char* dwell_bucket(int64_t dwell_ms);

// Renders an action log as deterministic natural-language segments of
// `segment_len` consecutive steps (the last, possibly partial, segment is
// kept). segment_len must be in [5, 10].
std::vector<std::string> summarize_trajectory(std::span<const ActionEvent> actions, int64_t segment_len);

// Deterministic description of a persona's intended behavior, rendered from
// its numeric knobs with the same vocabulary the trajectory summaries use.
std::string describe_persona(const PersonaSpec& persona);

}  // namespace pfp::sim
