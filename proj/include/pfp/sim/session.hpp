// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "pfp/common/rng.hpp"
#include "pfp/sim/spec.hpp"

namespace pfp::sim {

// Splits an object into MTU-sized packets plus a remainder packet.
std::vector<int64_t> packetize(int64_t object_bytes, int64_t mtu);

// Emits the traffic of one action: a client->server request of 100-800 bytes
// followed by the packetized response object, with per-packet gaps of
// rtt/2 jittered +-20%. Scroll/Dwell actions additionally emit lazy-load
// fetches scaled by scroll_depth_mean and burst_scale. Packets are appended
// to `out` on connection `connection_id` starting at *t_us, which is advanced
// past the burst.
void emit_action_traffic(const ActionEvent& action, const SiteSpec& site, const PersonaSpec& persona,
                         const std::string& session_id, uint32_t connection_id, uint64_t* t_us, Rng& rng,
                         std::vector<trace::PacketRecord>* out);

// Runs one persona-conditioned browsing session against a site. The policy
// samples an action each step (weights modulated by search_bias and the
// current page), walks the site's page graph, emits the action's traffic,
// then dwells with background ad bursts interleaved at the site's
// ad_burst_rate. Runs exactly ceil(step_budget * patience) steps (at least
// one). Byte-identical output for identical inputs.
SessionTrace simulate_session(const PersonaSpec& persona, const SiteSpec& site, const std::string& session_id,
                              uint64_t seed, int64_t step_budget);

}  // namespace pfp::sim
