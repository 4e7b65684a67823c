// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "pfp/trace/types.hpp"

namespace pfp::trace {

// Inter-arrival gaps, aligned index-for-index with `records`. The first
// packet of each (session, connection) gets gap 0; every other packet gets
// ts_t - ts_{t-1} against the previous packet of the same connection, no
// matter where window boundaries later fall. Input must be sorted by ts_us
// within each connection.
std::vector<uint32_t> compute_gaps(std::span<const PacketRecord> records);

// Cuts gap-annotated records into non-overlapping windows of exactly
// `window_len` packets per connection; the trailing `n mod L` packets of each
// connection are discarded. Windows never span connections.
std::vector<Window> extract_windows(std::span<const PacketRecord> records, std::span<const uint32_t> gaps,
                                    int64_t window_len, uint16_t site_label, uint16_t persona_label);

// Writes the L x 2 feature matrix for one window into `out` (size 2*L,
// channel-major: L lengths then L gaps).
void normalize_window(const Window& w, const NormConfig& cfg, std::span<float> out);

}  // namespace pfp::trace
