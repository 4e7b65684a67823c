// SPDX-License-Identifier: Apache-2.0
#include "pfp/sim/session.hpp"

#include <algorithm>
#include <cmath>

#include "pfp/common/error.hpp"

namespace pfp::sim {

namespace {

// Idle gap after which the pooled connection is considered closed by the
// server; the next fetch then opens a fresh connection.
constexpr int64_t kIdleTimeoutMs = 60000;

// Fraction of a page-type object fetched by each action kind. Clicks and
// navigations load full pages; scrolls pull partial content plus lazy tiles;
// dwell refreshes and exits ping small endpoints.
double action_object_factor(Action a) {
  switch (a) {
    case Action::search:
    case Action::click:
    case Action::navigate:
    case Action::tab_open: return 1.0;
    case Action::scroll: return 0.5;
    case Action::dwell: return 0.15;
    case Action::exit_page: return 0.2;
  }
  return 1.0;
}

uint64_t half_rtt_jittered_us(const SiteSpec& site, Rng& rng) {
  double g = site.rtt_ms * 500.0 * rng.uniform(0.8, 1.2);
  return static_cast<uint64_t>(std::llround(std::max(g, 1.0)));
}

int64_t sample_object_bytes(const SiteSpec& site, PageType page, double scale, Rng& rng) {
  const std::vector<ObjectSizeComponent>& mix = site.object_size_dist.at(page);
  std::vector<double> weights(mix.size());
  for (size_t i = 0; i < mix.size(); ++i) weights[i] = mix[i].weight;
  const ObjectSizeComponent& c = mix[rng.weighted_choice(weights)];
  double bytes = rng.lognormal(c.median_bytes, c.sigma) * scale;
  return std::max<int64_t>(1, static_cast<int64_t>(std::llround(bytes)));
}

void push_packet(std::vector<trace::PacketRecord>* out, const std::string& sess, uint32_t conn, uint64_t ts,
                 int64_t len) {
  len = std::clamp<int64_t>(len, -65535, 65535);
  out->push_back({sess, conn, ts, static_cast<int32_t>(len)});
}

// One request/response exchange at *t_us; advances *t_us past the burst.
void emit_fetch(const SiteSpec& site, const std::string& sess, uint32_t conn, int64_t request_bytes,
                int64_t object_bytes, uint64_t* t_us, Rng& rng, std::vector<trace::PacketRecord>* out) {
  push_packet(out, sess, conn, *t_us, request_bytes);
  *t_us += half_rtt_jittered_us(site, rng);
  for (int64_t chunk : packetize(object_bytes, site.mtu)) {
    push_packet(out, sess, conn, *t_us, -chunk);
    *t_us += half_rtt_jittered_us(site, rng);
  }
}

PageType transition(PageType page, Action a, const SiteSpec& site) {
  switch (a) {
    case Action::search:
      return site.has_page(PageType::search_results) ? PageType::search_results : page;
    case Action::click:
      if (page == PageType::detail)
        return site.has_page(PageType::comments) ? PageType::comments : PageType::detail;
      if (page == PageType::comments) return PageType::detail;
      return site.has_page(PageType::detail) ? PageType::detail : page;
    case Action::navigate:
      return site.has_page(PageType::feed) ? PageType::feed : site.page_types[0];
    case Action::scroll:
    case Action::dwell: return page;
    case Action::tab_open:
    case Action::exit_page: return site.page_types[0];
  }
  return page;
}

Action sample_action(const PersonaSpec& p, const SiteSpec& site, PageType page, Rng& rng) {
  std::array<double, kActionCount> w = p.action_weights;
  // Search leans on search_bias, clicking recommendations on its complement.
  w[static_cast<size_t>(Action::search)] *= 0.4 + 1.2 * p.search_bias;
  if (page == PageType::search_results || page == PageType::feed || page == PageType::homepage)
    w[static_cast<size_t>(Action::click)] *= 1.6 - 1.2 * p.search_bias;
  if (page == PageType::feed || page == PageType::detail || page == PageType::comments)
    w[static_cast<size_t>(Action::scroll)] *= 1.3;
  if (!site.has_page(PageType::search_results)) w[static_cast<size_t>(Action::search)] = 0.0;
  if (!site.has_page(PageType::detail)) w[static_cast<size_t>(Action::click)] = 0.0;

  double total = 0.0;
  for (double v : w) total += v;
  if (total <= 0.0) return Action::dwell;
  return static_cast<Action>(rng.weighted_choice(w));
}

}  // namespace

std::vector<int64_t> packetize(int64_t object_bytes, int64_t mtu) {
  if (object_bytes < 1) fail("sim.bad_object", "object size must be >= 1 byte, got {}", object_bytes);
  if (mtu < 1) fail("sim.bad_object", "mtu must be >= 1, got {}", mtu);
  std::vector<int64_t> chunks(static_cast<size_t>(object_bytes / mtu), mtu);
  if (object_bytes % mtu != 0) chunks.push_back(object_bytes % mtu);
  return chunks;
}

void emit_action_traffic(const ActionEvent& action, const SiteSpec& site, const PersonaSpec& persona,
                         const std::string& session_id, uint32_t connection_id, uint64_t* t_us, Rng& rng,
                         std::vector<trace::PacketRecord>* out) {
  const PageType page = action.page_type;
  int64_t request = rng.uniform_int(100, 800);
  int64_t object =
      sample_object_bytes(site, page, persona.burst_scale * action_object_factor(action.action), rng);
  emit_fetch(site, session_id, connection_id, request, object, t_us, rng, out);

  if (action.action == Action::scroll || action.action == Action::dwell) {
    double mean = persona.scroll_depth_mean * (action.action == Action::scroll ? 1.0 : 0.3);
    int64_t fetches = rng.poisson(mean);
    if (action.action == Action::scroll) fetches = std::max<int64_t>(1, fetches);
    for (int64_t i = 0; i < fetches; ++i) {
      // Short think pause while the user keeps scrolling.
      *t_us += static_cast<uint64_t>(rng.uniform_int(50, 250)) * 1000ull;
      int64_t lazy_request = rng.uniform_int(100, 400);
      int64_t lazy_object = sample_object_bytes(site, page, persona.burst_scale * 0.35, rng);
      emit_fetch(site, session_id, connection_id, lazy_request, lazy_object, t_us, rng, out);
    }
  }
}

SessionTrace simulate_session(const PersonaSpec& persona, const SiteSpec& site, const std::string& session_id,
                              uint64_t seed, int64_t step_budget) {
  persona.validate();
  site.validate();
  if (step_budget < 1) fail("sim.bad_budget", "step budget must be >= 1, got {}", step_budget);

  SessionTrace trace;
  trace.session_id = session_id;
  trace.site_id = site.id;
  trace.persona_id = persona.id;
  trace.seed = seed;

  Rng rng(seed);
  const int64_t steps = std::max<int64_t>(
      1, static_cast<int64_t>(std::ceil(static_cast<double>(step_budget) * persona.patience - 1e-9)));

  PageType page = site.page_types[0];
  uint32_t conn = 0;
  uint64_t t_us = 0;
  bool idle_expired = false;

  for (int64_t step = 1; step <= steps; ++step) {
    // Transport is pooled/multiplexed: tab events reuse the connection, but a
    // long idle gap lets the server close it, so the next fetch reconnects.
    if (idle_expired) {
      conn += 1;
      idle_expired = false;
    }
    Action a = sample_action(persona, site, page, rng);
    page = transition(page, a, site);

    int64_t dwell_ms =
        std::max<int64_t>(1, static_cast<int64_t>(std::llround(rng.lognormal(persona.dwell_med_ms,
                                                                             persona.dwell_sigma))));
    dwell_ms = std::min<int64_t>(dwell_ms, 120000);
    if (dwell_ms > kIdleTimeoutMs) idle_expired = true;

    ActionEvent event{static_cast<int32_t>(step), a, page, dwell_ms};
    emit_action_traffic(event, site, persona, session_id, conn, &t_us, rng, &trace.records);
    trace.actions.push_back(event);

    // Background ad bursts spread over the dwell.
    const uint64_t dwell_end = t_us + static_cast<uint64_t>(dwell_ms) * 1000ull;
    if (site.ad_burst_rate > 0.0) {
      int64_t bursts = rng.poisson(site.ad_burst_rate * static_cast<double>(dwell_ms) / 1000.0);
      std::vector<double> offsets(static_cast<size_t>(bursts));
      for (double& o : offsets) o = rng.uniform();
      std::sort(offsets.begin(), offsets.end());
      uint64_t cursor = t_us;
      for (double o : offsets) {
        uint64_t at = t_us + static_cast<uint64_t>(o * static_cast<double>(dwell_ms) * 1000.0);
        cursor = std::max(cursor, at);
        int64_t ad_request = rng.uniform_int(100, 400);
        int64_t ad_object =
            std::max<int64_t>(1, static_cast<int64_t>(std::llround(rng.lognormal(8000.0, 0.8))));
        emit_fetch(site, session_id, conn, ad_request, ad_object, &cursor, rng, &trace.records);
      }
      t_us = std::max(dwell_end, cursor);
    } else {
      t_us = dwell_end;
    }
  }
  return trace;
}

}  // namespace pfp::sim
