// SPDX-License-Identifier: Apache-2.0
#include "pfp/trace/parse.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>
#include <json.hpp>

#include "pfp/common/error.hpp"

namespace pfp::trace {

namespace {

PacketRecord parse_line(const std::string& line, size_t line_no) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    fail("trace.malformed_line", "line {}: not a JSON object", line_no);
  if (!(j.contains("sess") && j.contains("conn") && j.contains("ts_us") && j.contains("len")) || j.size() != 4)
    fail("trace.malformed_line", "line {}: expected keys sess, conn, ts_us, len", line_no);
  if (!j["sess"].is_string() || !j["conn"].is_number_unsigned() || !j["ts_us"].is_number_unsigned() ||
      !j["len"].is_number_integer())
    fail("trace.malformed_line", "line {}: bad field types", line_no);

  PacketRecord r;
  r.session_id = j["sess"].get<std::string>();
  r.connection_id = j["conn"].get<uint32_t>();
  r.ts_us = j["ts_us"].get<uint64_t>();
  int64_t len = j["len"].get<int64_t>();
  if (len == 0) fail("trace.zero_length", "line {}: len must be non-zero", line_no);
  if (len > 65535 || len < -65535)
    fail("trace.length_range", "line {}: |len| must be <= 65535, got {}", line_no, len);
  r.signed_len = static_cast<int32_t>(len);
  return r;
}

}  // namespace

std::vector<PacketRecord> parse_trace(std::istream& in) {
  std::vector<PacketRecord> records;
  std::unordered_map<std::string, uint64_t> last_ts;  // keyed by "sess/conn"
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    PacketRecord r = parse_line(line, line_no);
    std::string key = fmt::format("{}/{}", r.session_id, r.connection_id);
    auto it = last_ts.find(key);
    if (it != last_ts.end() && r.ts_us < it->second)
      fail("trace.ts_regression", "line {}: timestamp regression in session {} connection {}", line_no,
           r.session_id, r.connection_id);
    last_ts[key] = r.ts_us;
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<PacketRecord> parse_trace_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("io.open_failed", "cannot open trace file {}", path.string());
  return parse_trace(in);
}

std::string format_trace(const std::vector<PacketRecord>& records) {
  fmt::memory_buffer buf;
  for (const PacketRecord& r : records)
    fmt::format_to(std::back_inserter(buf), "{{\"sess\":\"{}\",\"conn\":{},\"ts_us\":{},\"len\":{}}}\n",
                   r.session_id, r.connection_id, r.ts_us, r.signed_len);
  return fmt::to_string(buf);
}

}  // namespace pfp::trace
