// SPDX-License-Identifier: Apache-2.0
#include "pfp/trace/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "pfp/common/error.hpp"
#include "pfp/common/fsio.hpp"
#include "pfp/common/rng.hpp"

namespace pfp::trace {

SplitAssignment assign_splits(const std::vector<SessionLabel>& sessions, std::array<double, 3> ratios,
                              uint64_t seed) {
  if (sessions.empty()) fail("split.empty", "no sessions to split");
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) fail("split.bad_ratios", "ratios must sum to 1, got {}", sum);
  for (double r : ratios)
    if (r < 0.0) fail("split.bad_ratios", "ratios must be non-negative");

  // Strata in sorted key order so iteration never depends on input order.
  std::map<std::pair<std::string, std::string>, std::vector<std::string>> strata;
  SplitAssignment out;
  out.seed = seed;
  out.ratios = ratios;
  for (const SessionLabel& s : sessions) {
    if (!out.by_session.emplace(s.session_id, SplitPart::train).second)
      fail("split.duplicate_session", "session {} appears more than once", s.session_id);
    strata[{s.site, s.persona}].push_back(s.session_id);
  }

  for (auto& [key, ids] : strata) {
    Rng rng(derive_seed(seed, fnv1a64(key.first), fnv1a64(key.second)));
    rng.shuffle(ids);

    const size_t n = ids.size();
    std::array<size_t, 3> counts{};
    std::array<double, 3> frac{};
    size_t assigned = 0;
    for (int p = 0; p < 3; ++p) {
      double target = static_cast<double>(n) * ratios[p];
      counts[p] = static_cast<size_t>(std::floor(target));
      frac[p] = target - std::floor(target);
      assigned += counts[p];
    }
    // Largest remainder; ties resolved toward the earlier part.
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
    for (size_t r = 0; r < n - assigned; ++r) counts[order[r % 3]] += 1;

    size_t i = 0;
    for (int p = 0; p < 3; ++p)
      for (size_t k = 0; k < counts[p]; ++k) out.by_session[ids[i++]] = static_cast<SplitPart>(p);
  }
  return out;
}

const char* split_part_name(SplitPart p) {
  switch (p) {
    case SplitPart::train: return "train";
    case SplitPart::val: return "val";
    case SplitPart::test: return "test";
  }
  return "?";
}

std::string split_to_json(const SplitAssignment& split) {
  nlohmann::json j;
  j["seed"] = split.seed;
  j["ratios"] = split.ratios;
  nlohmann::json m = nlohmann::json::object();
  for (const auto& [sess, part] : split.by_session) m[sess] = split_part_name(part);
  j["by_session"] = std::move(m);
  return j.dump(2) + "\n";
}

SplitAssignment split_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) fail("split.malformed", "split file is not valid JSON");
  SplitAssignment out;
  out.seed = j.at("seed").get<uint64_t>();
  auto r = j.at("ratios");
  for (int i = 0; i < 3; ++i) out.ratios[i] = r.at(i).get<double>();
  for (auto& [sess, part] : j.at("by_session").items()) {
    std::string p = part.get<std::string>();
    if (p == "train")
      out.by_session[sess] = SplitPart::train;
    else if (p == "val")
      out.by_session[sess] = SplitPart::val;
    else if (p == "test")
      out.by_session[sess] = SplitPart::test;
    else
      fail("split.malformed", "unknown part name {}", p);
  }
  return out;
}

}  // namespace pfp::trace
