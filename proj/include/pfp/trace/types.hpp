// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pfp::trace {

// One observed packet-metadata event. Direction is the sign of signed_len:
// positive = client->server, negative = server->client. Lengths are bounded
// by |len| in [1, 65535]; a zero length is invalid everywhere.
struct PacketRecord {
  std::string session_id;
  uint32_t connection_id = 0;
  uint64_t ts_us = 0;  // monotone non-decreasing within a connection
  int32_t signed_len = 0;

  bool operator==(const PacketRecord&) const = default;
};

// The learning unit: exactly `lengths.size() == gaps.size() == L` consecutive
// packets of a single connection. gaps[0] of the first window of a connection
// is 0; for later windows it is the true delta to the previous packet.
struct Window {
  std::vector<int32_t> lengths;
  std::vector<uint32_t> gaps;  // microseconds
  uint16_t site_label = 0;
  uint16_t persona_label = 0;
  std::string session_id;
  uint32_t connection_id = 0;
  uint32_t window_index = 0;  // position within its connection
};

// Ordered site/persona name sets. When has_ow is set, the open-world label
// occupies the final persona index (== personas.size()).
struct LabelSpace {
  std::vector<std::string> sites;
  std::vector<std::string> personas;
  bool has_ow = false;

  size_t persona_class_count() const { return personas.size() + (has_ow ? 1 : 0); }
  uint16_t ow_index() const { return static_cast<uint16_t>(personas.size()); }

  std::string persona_name(uint16_t idx) const;
  std::vector<std::string> persona_class_names() const;

  // Stable digest over names and ordering; stored in checkpoints so a model
  // cannot silently be evaluated against a different label set.
  uint64_t hash() const;
};

enum class SplitPart : uint8_t { train = 0, val = 1, test = 2 };

const char* split_part_name(SplitPart p);

struct SplitAssignment {
  std::map<std::string, SplitPart> by_session;
  uint64_t seed = 0;
  std::array<double, 3> ratios{0.7, 0.1, 0.2};
};

// Feature scaling for the two window channels. Channel 0 divides signed
// length by len_scale and clamps to [-1, 1]; channel 1 applies
// ln(1 + gap/gap_unit_us) / ln(1 + gap_log_saturation) clamped to [0, 1].
struct NormConfig {
  double len_scale = 1500.0;
  double gap_unit_us = 1000.0;
  double gap_log_saturation = 10000.0;
};

}  // namespace pfp::trace
