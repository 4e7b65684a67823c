// SPDX-License-Identifier: Apache-2.0
#include "pfp/trace/windows.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "pfp/common/error.hpp"

namespace pfp::trace {

namespace {

struct ConnKey {
  std::string session;
  uint32_t conn;
  bool operator==(const ConnKey&) const = default;
};

struct ConnKeyHash {
  size_t operator()(const ConnKey& k) const {
    return std::hash<std::string>()(k.session) ^ (std::hash<uint32_t>()(k.conn) * 0x9e3779b9u);
  }
};

}  // namespace

std::vector<uint32_t> compute_gaps(std::span<const PacketRecord> records) {
  std::vector<uint32_t> gaps(records.size(), 0);
  std::unordered_map<ConnKey, uint64_t, ConnKeyHash> last_ts;
  for (size_t i = 0; i < records.size(); ++i) {
    const PacketRecord& r = records[i];
    ConnKey key{r.session_id, r.connection_id};
    auto it = last_ts.find(key);
    if (it == last_ts.end()) {
      gaps[i] = 0;
    } else {
      if (r.ts_us < it->second)
        fail("trace.unsorted", "records of session {} connection {} are not sorted by ts_us", r.session_id,
             r.connection_id);
      uint64_t d = r.ts_us - it->second;
      if (d > UINT32_MAX)
        fail("trace.gap_overflow", "gap of {} us in session {} connection {} exceeds the u32 range", d,
             r.session_id, r.connection_id);
      gaps[i] = static_cast<uint32_t>(d);
    }
    last_ts[key] = r.ts_us;
  }
  return gaps;
}

std::vector<Window> extract_windows(std::span<const PacketRecord> records, std::span<const uint32_t> gaps,
                                    int64_t window_len, uint16_t site_label, uint16_t persona_label) {
  if (window_len <= 0) fail("trace.bad_window_len", "window length must be >= 1, got {}", window_len);
  if (records.size() != gaps.size())
    fail("trace.gap_mismatch", "records ({}) and gaps ({}) differ in length", records.size(), gaps.size());

  // Record indices per connection, in first-appearance order.
  std::unordered_map<ConnKey, size_t, ConnKeyHash> conn_slot;
  std::vector<std::vector<size_t>> conn_indices;
  std::vector<ConnKey> conn_keys;
  for (size_t i = 0; i < records.size(); ++i) {
    ConnKey key{records[i].session_id, records[i].connection_id};
    auto [it, inserted] = conn_slot.try_emplace(key, conn_indices.size());
    if (inserted) {
      conn_indices.emplace_back();
      conn_keys.push_back(key);
    }
    conn_indices[it->second].push_back(i);
  }

  std::vector<Window> windows;
  const size_t L = static_cast<size_t>(window_len);
  for (size_t c = 0; c < conn_indices.size(); ++c) {
    const std::vector<size_t>& idx = conn_indices[c];
    size_t full = idx.size() / L;
    for (size_t w = 0; w < full; ++w) {
      Window win;
      win.lengths.resize(L);
      win.gaps.resize(L);
      for (size_t t = 0; t < L; ++t) {
        size_t src = idx[w * L + t];
        win.lengths[t] = records[src].signed_len;
        win.gaps[t] = gaps[src];
      }
      win.site_label = site_label;
      win.persona_label = persona_label;
      win.session_id = conn_keys[c].session;
      win.connection_id = conn_keys[c].conn;
      win.window_index = static_cast<uint32_t>(w);
      windows.push_back(std::move(win));
    }
  }
  return windows;
}

void normalize_window(const Window& w, const NormConfig& cfg, std::span<float> out) {
  const size_t L = w.lengths.size();
  if (w.gaps.size() != L || out.size() != 2 * L)
    fail("trace.norm_shape", "normalize_window: inconsistent sizes (L={}, gaps={}, out={})", L, w.gaps.size(),
         out.size());
  const double log_denom = std::log1p(cfg.gap_log_saturation);
  for (size_t t = 0; t < L; ++t) {
    double len = static_cast<double>(w.lengths[t]) / cfg.len_scale;
    out[t] = static_cast<float>(std::clamp(len, -1.0, 1.0));
  }
  for (size_t t = 0; t < L; ++t) {
    double g = std::log1p(static_cast<double>(w.gaps[t]) / cfg.gap_unit_us) / log_denom;
    out[L + t] = static_cast<float>(std::clamp(g, 0.0, 1.0));
  }
}

}  // namespace pfp::trace
