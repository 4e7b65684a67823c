// SPDX-License-Identifier: Apache-2.0
#include "pfp/trace/window_file.hpp"

#include <cstring>
#include <string>

#include "pfp/common/error.hpp"
#include "pfp/common/fsio.hpp"

namespace pfp::trace {

namespace {

constexpr char kMagic[4] = {'P', 'F', 'W', 'N'};

template <typename T>
void put(std::string& buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.append(raw, sizeof(T));
}

template <typename T>
T take(const std::string& buf, size_t& off, const std::filesystem::path& path) {
  if (off + sizeof(T) > buf.size())
    fail("windowfile.truncated", "{} is truncated at offset {}", path.string(), off);
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

void write_windows(const std::filesystem::path& path, std::span<const Window> windows, int64_t window_len) {
  if (window_len <= 0) fail("trace.bad_window_len", "window length must be >= 1, got {}", window_len);
  const size_t L = static_cast<size_t>(window_len);
  std::string buf;
  buf.reserve(20 + windows.size() * (4 + 8 * L));
  buf.append(kMagic, 4);
  put<uint32_t>(buf, kWindowFileVersion);
  put<uint32_t>(buf, static_cast<uint32_t>(L));
  put<uint64_t>(buf, windows.size());
  for (const Window& w : windows) {
    if (w.lengths.size() != L || w.gaps.size() != L)
      fail("windowfile.bad_window", "window of session {} has length {} but file L is {}", w.session_id,
           w.lengths.size(), L);
    put<uint16_t>(buf, w.site_label);
    put<uint16_t>(buf, w.persona_label);
    buf.append(reinterpret_cast<const char*>(w.lengths.data()), 4 * L);
    buf.append(reinterpret_cast<const char*>(w.gaps.data()), 4 * L);
  }
  atomic_write_file(path, buf);
}

WindowFile read_windows(const std::filesystem::path& path) {
  std::string buf = read_file(path);
  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
    fail("windowfile.bad_magic", "{} is not a window file", path.string());
  size_t off = 4;
  uint32_t version = take<uint32_t>(buf, off, path);
  if (version != kWindowFileVersion)
    fail("windowfile.bad_version", "{}: unsupported version {} (expected {})", path.string(), version,
         kWindowFileVersion);
  uint32_t L = take<uint32_t>(buf, off, path);
  uint64_t count = take<uint64_t>(buf, off, path);

  WindowFile out;
  out.window_len = L;
  out.windows.resize(count);
  for (uint64_t i = 0; i < count; ++i) {
    Window& w = out.windows[i];
    w.site_label = take<uint16_t>(buf, off, path);
    w.persona_label = take<uint16_t>(buf, off, path);
    if (off + 8ull * L > buf.size())
      fail("windowfile.truncated", "{} is truncated in window {}", path.string(), i);
    w.lengths.resize(L);
    w.gaps.resize(L);
    std::memcpy(w.lengths.data(), buf.data() + off, 4ull * L);
    off += 4ull * L;
    std::memcpy(w.gaps.data(), buf.data() + off, 4ull * L);
    off += 4ull * L;
    w.window_index = static_cast<uint32_t>(i);
  }
  if (off != buf.size())
    fail("windowfile.trailing_bytes", "{} has {} unexpected trailing bytes", path.string(), buf.size() - off);
  return out;
}

}  // namespace pfp::trace
