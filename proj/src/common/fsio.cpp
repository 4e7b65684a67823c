// SPDX-License-Identifier: Apache-2.0
#include "pfp/common/fsio.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "pfp/common/error.hpp"

namespace pfp {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("io.open_failed", "cannot open {}", path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail("io.read_failed", "read error on {}", path.string());
  return std::move(ss).str();
}

void atomic_write_file(const std::filesystem::path& path, std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail("io.open_failed", "cannot open {} for writing", tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) fail("io.write_failed", "write error on {}", tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail("io.rename_failed", "cannot rename {} -> {}: {}", tmp.string(), path.string(), ec.message());
}

uint64_t fnv1a64(std::span<const unsigned char> bytes, uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t fnv1a64(std::string_view s, uint64_t h) {
  return fnv1a64(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(s.data()), s.size()), h);
}

std::string to_hex(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

}  // namespace pfp
