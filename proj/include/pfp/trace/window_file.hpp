// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "pfp/trace/types.hpp"

namespace pfp::trace {

inline constexpr uint32_t kWindowFileVersion = 1;

// Binary window container. Layout, all little-endian:
//   magic "PFWN", version u32, L u32, count u64,
//   then per window: site u16, persona u16, L x i32 lengths, L x u32 gaps.
// Session/connection identity is intentionally not persisted; windows are
// already routed to their split when written.
void write_windows(const std::filesystem::path& path, std::span<const Window> windows, int64_t window_len);

struct WindowFile {
  int64_t window_len = 0;
  std::vector<Window> windows;
};

WindowFile read_windows(const std::filesystem::path& path);

}  // namespace pfp::trace
