// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "pfp/common/error.hpp"
#include "pfp/common/fsio.hpp"
#include "pfp/common/rng.hpp"
#include "pfp/trace/parse.hpp"
#include "pfp/trace/split.hpp"
#include "pfp/trace/window_file.hpp"
#include "pfp/trace/windows.hpp"

using namespace pfp;
using namespace pfp::trace;

namespace {

PacketRecord rec(const char* sess, uint32_t conn, uint64_t ts, int32_t len) {
  return {sess, conn, ts, len};
}

std::string err_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST_CASE("parse_trace: empty stream yields no records") {
  std::istringstream in("");
  CHECK(parse_trace(in).empty());
}

TEST_CASE("parse_trace: three valid lines parse in order, field by field") {
  std::istringstream in(
      "{\"sess\":\"a\",\"conn\":0,\"ts_us\":10,\"len\":500}\n"
      "{\"sess\":\"a\",\"conn\":0,\"ts_us\":25,\"len\":-1500}\n"
      "{\"sess\":\"b\",\"conn\":3,\"ts_us\":5,\"len\":42}\n");
  auto records = parse_trace(in);
  REQUIRE(records.size() == 3);
  CHECK(records[0] == rec("a", 0, 10, 500));
  CHECK(records[1] == rec("a", 0, 25, -1500));
  CHECK(records[2] == rec("b", 3, 5, 42));
}

TEST_CASE("parse_trace: zero length is rejected with the line number") {
  std::istringstream in(
      "{\"sess\":\"a\",\"conn\":0,\"ts_us\":10,\"len\":500}\n"
      "{\"sess\":\"a\",\"conn\":0,\"ts_us\":25,\"len\":0}\n");
  try {
    parse_trace(in);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == "trace.zero_length");
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("parse_trace: malformed line and timestamp regression are errors") {
  std::istringstream bad("not json at all\n");
  CHECK(err_code([&] { parse_trace(bad); }) == "trace.malformed_line");

  std::istringstream extra("{\"sess\":\"a\",\"conn\":0,\"ts_us\":1,\"len\":5,\"x\":1}\n");
  CHECK(err_code([&] { parse_trace(extra); }) == "trace.malformed_line");

  std::istringstream regress(
      "{\"sess\":\"a\",\"conn\":1,\"ts_us\":100,\"len\":5}\n"
      "{\"sess\":\"a\",\"conn\":1,\"ts_us\":99,\"len\":5}\n");
  try {
    parse_trace(regress);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == "trace.ts_regression");
    CHECK(std::string(e.what()).find("connection 1") != std::string::npos);
  }
}

TEST_CASE("parse/format round trip") {
  std::vector<PacketRecord> records{rec("s-1", 0, 0, 100), rec("s-1", 0, 7, -1500), rec("s-2", 1, 3, 60)};
  std::istringstream in(format_trace(records));
  CHECK(parse_trace(in) == records);
}

TEST_CASE("compute_gaps: pairwise subtraction within one connection") {
  std::vector<PacketRecord> records{rec("a", 0, 0, 1), rec("a", 0, 10, 1), rec("a", 0, 25, 1)};
  CHECK(compute_gaps(records) == std::vector<uint32_t>{0, 10, 15});
}

TEST_CASE("compute_gaps: first packet of each connection gets 0") {
  std::vector<PacketRecord> one{rec("a", 0, 1234, 1)};
  CHECK(compute_gaps(one) == std::vector<uint32_t>{0});

  std::vector<PacketRecord> two{rec("a", 0, 50, 1), rec("a", 1, 10, 1)};
  CHECK(compute_gaps(two) == std::vector<uint32_t>{0, 0});
}

TEST_CASE("compute_gaps: unsorted input is an error") {
  std::vector<PacketRecord> records{rec("a", 0, 10, 1), rec("a", 0, 5, 1)};
  CHECK(err_code([&] { compute_gaps(records); }) == "trace.unsorted");
}

TEST_CASE("extract_windows: floor(n/L) non-overlapping windows, trailing discarded") {
  std::vector<PacketRecord> records;
  for (int i = 0; i < 2500; ++i) records.push_back(rec("a", 0, static_cast<uint64_t>(i), i % 2 ? 100 : -200));
  auto gaps = compute_gaps(records);
  auto windows = extract_windows(records, gaps, 1000, 3, 4);
  REQUIRE(windows.size() == 2);
  CHECK(windows[0].window_index == 0);
  CHECK(windows[1].window_index == 1);
  CHECK(windows[0].lengths[0] == records[0].signed_len);
  CHECK(windows[0].lengths[999] == records[999].signed_len);
  CHECK(windows[1].lengths[0] == records[1000].signed_len);
  CHECK(windows[1].lengths[999] == records[1999].signed_len);
  CHECK(windows[0].site_label == 3);
  CHECK(windows[0].persona_label == 4);
}

TEST_CASE("extract_windows: connection shorter than L yields nothing") {
  std::vector<PacketRecord> records;
  for (int i = 0; i < 999; ++i) records.push_back(rec("a", 0, static_cast<uint64_t>(i), 1));
  auto gaps = compute_gaps(records);
  CHECK(extract_windows(records, gaps, 1000, 0, 0).empty());
}

TEST_CASE("extract_windows: windows never span connections") {
  std::vector<PacketRecord> records;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 1000; ++i)
      records.push_back(rec("a", static_cast<uint32_t>(c), static_cast<uint64_t>(i), 1));
  auto gaps = compute_gaps(records);
  auto windows = extract_windows(records, gaps, 1000, 0, 0);
  REQUIRE(windows.size() == 2);
  CHECK(windows[0].connection_id != windows[1].connection_id);
}

TEST_CASE("extract_windows: gap of a later window's first packet is the true delta") {
  std::vector<PacketRecord> records;
  for (int i = 0; i < 8; ++i) records.push_back(rec("a", 0, static_cast<uint64_t>(100 * i), 1));
  auto gaps = compute_gaps(records);
  auto windows = extract_windows(records, gaps, 4, 0, 0);
  REQUIRE(windows.size() == 2);
  CHECK(windows[0].gaps[0] == 0);     // connection start
  CHECK(windows[1].gaps[0] == 100);   // carries across the boundary
}

TEST_CASE("extract_windows: L <= 0 is a configuration error") {
  std::vector<PacketRecord> records{rec("a", 0, 0, 1)};
  auto gaps = compute_gaps(records);
  CHECK(err_code([&] { extract_windows(records, gaps, 0, 0, 0); }) == "trace.bad_window_len");
}

TEST_CASE("window-count conservation over random traces") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<PacketRecord> records;
    std::map<std::pair<std::string, uint32_t>, int64_t> per_conn;
    int64_t conns = rng.uniform_int(1, 6);
    for (int64_t c = 0; c < conns; ++c) {
      int64_t n = rng.uniform_int(1, 700);
      per_conn[{"s", static_cast<uint32_t>(c)}] = n;
      for (int64_t i = 0; i < n; ++i)
        records.push_back(rec("s", static_cast<uint32_t>(c), static_cast<uint64_t>(i * 3), 1));
    }
    const int64_t L = rng.uniform_int(1, 300);
    auto gaps = compute_gaps(records);
    auto windows = extract_windows(records, gaps, L, 0, 0);
    int64_t expected = 0;
    for (const auto& [key, n] : per_conn) expected += n / L;
    CHECK(static_cast<int64_t>(windows.size()) == expected);
  }
}

TEST_CASE("normalize_window: boundary and clamp cases") {
  NormConfig cfg;
  Window w;
  w.lengths = {1500, -3000, 100};
  w.gaps = {0, 9999000, 1000};
  std::vector<float> out(6);
  normalize_window(w, cfg, out);
  CHECK(out[0] == doctest::Approx(1.0));
  CHECK(out[1] == doctest::Approx(-1.0));  // clamped
  CHECK(out[3] == doctest::Approx(0.0));

  // Evaluate the formula independently for the 9999000 us gap.
  double expected = std::log1p(9999000.0 / 1000.0) / std::log1p(10000.0);
  CHECK(out[4] == doctest::Approx(expected).epsilon(1e-6));
  CHECK(out[4] <= 1.0f);
  CHECK(out[5] == doctest::Approx(std::log1p(1.0) / std::log1p(10000.0)).epsilon(1e-6));
}

TEST_CASE("assign_splits: 10 sessions of one stratum at 70/10/20 give 7/1/2") {
  std::vector<SessionLabel> sessions;
  for (int i = 0; i < 10; ++i) sessions.push_back({"sess" + std::to_string(i), "siteA", "P1"});
  SplitAssignment split = assign_splits(sessions, {0.7, 0.1, 0.2}, 5);
  std::array<int, 3> counts{};
  for (const auto& [sess, part] : split.by_session) counts[static_cast<size_t>(part)] += 1;
  CHECK(counts[0] == 7);
  CHECK(counts[1] == 1);
  CHECK(counts[2] == 2);
}

TEST_CASE("assign_splits: deterministic for a fixed seed, different across seeds") {
  std::vector<SessionLabel> sessions;
  for (int i = 0; i < 40; ++i)
    sessions.push_back({"sess" + std::to_string(i), i % 2 ? "A" : "B", "P" + std::to_string(i % 3)});
  SplitAssignment a = assign_splits(sessions, {0.7, 0.1, 0.2}, 5);
  SplitAssignment b = assign_splits(sessions, {0.7, 0.1, 0.2}, 5);
  CHECK(a.by_session == b.by_session);
  SplitAssignment c = assign_splits(sessions, {0.7, 0.1, 0.2}, 6);
  CHECK(a.by_session != c.by_session);
}

TEST_CASE("assign_splits: stratum proportions within one session of target") {
  Rng rng(3);
  std::vector<SessionLabel> sessions;
  std::map<std::pair<std::string, std::string>, int64_t> stratum_sizes;
  for (int s = 0; s < 3; ++s)
    for (int p = 0; p < 4; ++p) {
      int64_t n = rng.uniform_int(3, 23);
      stratum_sizes[{"S" + std::to_string(s), "P" + std::to_string(p)}] = n;
      for (int64_t i = 0; i < n; ++i)
        sessions.push_back({"sess-" + std::to_string(s) + "-" + std::to_string(p) + "-" + std::to_string(i),
                            "S" + std::to_string(s), "P" + std::to_string(p)});
    }
  std::array<double, 3> ratios{0.7, 0.1, 0.2};
  SplitAssignment split = assign_splits(sessions, ratios, 11);
  for (const auto& [key, n] : stratum_sizes) {
    std::array<int64_t, 3> counts{};
    for (const SessionLabel& s : sessions)
      if (s.site == key.first && s.persona == key.second)
        counts[static_cast<size_t>(split.by_session.at(s.session_id))] += 1;
    for (int part = 0; part < 3; ++part) {
      double target = static_cast<double>(n) * ratios[static_cast<size_t>(part)];
      CHECK(std::abs(static_cast<double>(counts[static_cast<size_t>(part)]) - target) <= 1.0);
    }
  }
}

TEST_CASE("assign_splits: error cases") {
  CHECK(err_code([] { assign_splits({}, {0.7, 0.1, 0.2}, 1); }) == "split.empty");
  std::vector<SessionLabel> one{{"x", "A", "P"}};
  CHECK(err_code([&] { assign_splits(one, {0.5, 0.1, 0.2}, 1); }) == "split.bad_ratios");
  std::vector<SessionLabel> dup{{"x", "A", "P"}, {"x", "A", "P"}};
  CHECK(err_code([&] { assign_splits(dup, {0.7, 0.1, 0.2}, 1); }) == "split.duplicate_session");
}

TEST_CASE("split JSON round trip") {
  std::vector<SessionLabel> sessions;
  for (int i = 0; i < 12; ++i) sessions.push_back({"sess" + std::to_string(i), "A", "P1"});
  SplitAssignment split = assign_splits(sessions, {0.7, 0.1, 0.2}, 17);
  SplitAssignment back = split_from_json(split_to_json(split));
  CHECK(back.by_session == split.by_session);
  CHECK(back.seed == split.seed);
}

TEST_CASE("window file: bit-identical round trip on random windows") {
  Rng rng(123);
  const int64_t L = 32;
  std::vector<Window> windows;
  for (int i = 0; i < 17; ++i) {
    Window w;
    for (int64_t t = 0; t < L; ++t) {
      int32_t len = static_cast<int32_t>(rng.uniform_int(1, 1500)) * (rng.uniform() < 0.5 ? 1 : -1);
      w.lengths.push_back(len);
      w.gaps.push_back(static_cast<uint32_t>(rng.uniform_int(0, 1000000)));
    }
    w.site_label = static_cast<uint16_t>(rng.uniform_int(0, 9));
    w.persona_label = static_cast<uint16_t>(rng.uniform_int(0, 15));
    windows.push_back(std::move(w));
  }
  const auto path = std::filesystem::temp_directory_path() / "pfp_test_windows.pfwn";
  write_windows(path, windows, L);
  WindowFile read = read_windows(path);
  CHECK(read.window_len == L);
  REQUIRE(read.windows.size() == windows.size());
  for (size_t i = 0; i < windows.size(); ++i) {
    CHECK(read.windows[i].lengths == windows[i].lengths);
    CHECK(read.windows[i].gaps == windows[i].gaps);
    CHECK(read.windows[i].site_label == windows[i].site_label);
    CHECK(read.windows[i].persona_label == windows[i].persona_label);
  }
  std::filesystem::remove(path);
}

TEST_CASE("window file: distinct error kinds") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto good = dir / "pfp_wf_good.pfwn";
  Window w;
  w.lengths.assign(4, 7);
  w.gaps.assign(4, 1);
  write_windows(good, std::vector<Window>{w}, 4);

  const auto magic = dir / "pfp_wf_magic.pfwn";
  atomic_write_file(magic, "NOPE" + read_file(good).substr(4));
  CHECK(err_code([&] { read_windows(magic); }) == "windowfile.bad_magic");

  const auto trunc = dir / "pfp_wf_trunc.pfwn";
  std::string bytes = read_file(good);
  atomic_write_file(trunc, bytes.substr(0, bytes.size() - 3));
  CHECK(err_code([&] { read_windows(trunc); }) == "windowfile.truncated");

  const auto version = dir / "pfp_wf_ver.pfwn";
  bytes = read_file(good);
  bytes[4] = 99;  // version u32 LE starts at offset 4
  atomic_write_file(version, bytes);
  CHECK(err_code([&] { read_windows(version); }) == "windowfile.bad_version");

  for (const auto& p : {good, magic, trunc, version}) std::filesystem::remove(p);
}

TEST_CASE("label space: OW occupies the final index and hash is order-sensitive") {
  LabelSpace ls;
  ls.sites = {"A", "B"};
  ls.personas = {"P1", "P2"};
  ls.has_ow = true;
  CHECK(ls.persona_class_count() == 3);
  CHECK(ls.ow_index() == 2);
  CHECK(ls.persona_name(2) == "OW");
  LabelSpace swapped = ls;
  std::swap(swapped.personas[0], swapped.personas[1]);
  CHECK(ls.hash() != swapped.hash());
}
