// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <istream>
#include <vector>

#include "pfp/trace/types.hpp"

namespace pfp::trace {

// Parses trace NDJSON: one object per line with keys exactly
// {"sess": string, "conn": uint, "ts_us": uint64, "len": non-zero int}.
// Records come back in file order. Malformed lines, zero lengths, and
// timestamp regressions within a connection are hard errors carrying the
// 1-based line number.
std::vector<PacketRecord> parse_trace(std::istream& in);
std::vector<PacketRecord> parse_trace_file(const std::filesystem::path& path);

// Serializes records to the same NDJSON schema (LF line endings).
std::string format_trace(const std::vector<PacketRecord>& records);

}  // namespace pfp::trace
