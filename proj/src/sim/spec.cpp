// SPDX-License-Identifier: Apache-2.0
#include "pfp/sim/spec.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include "pfp/common/error.hpp"
#include "pfp/common/fsio.hpp"

namespace pfp::sim {

namespace {

constexpr const char* kActionNames[kActionCount] = {"Search", "Click",   "Scroll", "Navigate",
                                                    "Dwell",  "TabOpen", "Exit"};
constexpr const char* kPageNames[kPageTypeCount] = {"homepage", "search_results", "detail", "comments",
                                                    "feed"};

}  // namespace

const char* action_name(Action a) { return kActionNames[static_cast<size_t>(a)]; }

Action action_from_name(const std::string& name) {
  for (size_t i = 0; i < kActionCount; ++i)
    if (name == kActionNames[i]) return static_cast<Action>(i);
  fail("sim.bad_action", "unknown action type '{}'", name);
}

const char* page_type_name(PageType p) { return kPageNames[static_cast<size_t>(p)]; }

PageType page_type_from_name(const std::string& name) {
  for (size_t i = 0; i < kPageTypeCount; ++i)
    if (name == kPageNames[i]) return static_cast<PageType>(i);
  fail("sim.bad_page_type", "unknown page type '{}'", name);
}

void PersonaSpec::validate() const {
  if (id.empty()) fail("sim.bad_persona", "persona id must be non-empty");
  bool any_positive = false;
  for (double w : action_weights) {
    if (w < 0.0) fail("sim.bad_persona", "persona {}: negative action weight", id);
    if (w > 0.0) any_positive = true;
  }
  if (!any_positive) fail("sim.bad_persona", "persona {}: all action weights are zero", id);
  if (dwell_med_ms <= 0.0 || dwell_sigma < 0.0)
    fail("sim.bad_persona", "persona {}: invalid dwell parameters", id);
  if (scroll_depth_mean <= 0.0) fail("sim.bad_persona", "persona {}: scroll_depth_mean must be positive", id);
  if (search_bias < 0.0 || search_bias > 1.0)
    fail("sim.bad_persona", "persona {}: search_bias outside [0,1]", id);
  if (patience < 0.0 || patience > 1.0) fail("sim.bad_persona", "persona {}: patience outside [0,1]", id);
  if (burst_scale <= 0.0) fail("sim.bad_persona", "persona {}: burst_scale must be positive", id);
}

void SiteSpec::validate() const {
  if (id.empty()) fail("sim.bad_site", "site id must be non-empty");
  if (page_types.size() < 2) fail("sim.bad_site", "site {}: needs at least two page types", id);
  if (rtt_ms <= 0.0) fail("sim.bad_site", "site {}: rtt_ms must be positive", id);
  if (ad_burst_rate < 0.0) fail("sim.bad_site", "site {}: ad_burst_rate must be non-negative", id);
  if (mtu < 64) fail("sim.bad_site", "site {}: mtu too small", id);
  for (PageType p : page_types) {
    auto it = object_size_dist.find(p);
    if (it == object_size_dist.end() || it->second.empty())
      fail("sim.bad_site", "site {}: page type {} has no object size mixture", id, page_type_name(p));
    for (const ObjectSizeComponent& c : it->second)
      if (!(c.weight > 0.0) || !(c.median_bytes > 0.0) || c.sigma < 0.0)
        fail("sim.bad_site", "site {}: invalid object size component", id);
  }
}

bool SiteSpec::has_page(PageType p) const {
  for (PageType q : page_types)
    if (q == p) return true;
  return false;
}

namespace {

PersonaSpec persona_from_json(const nlohmann::json& j) {
  PersonaSpec p;
  p.id = j.at("id").get<std::string>();
  if (j.contains("name")) p.name = j.at("name").get<std::string>();
  for (const auto& [k, v] : j.at("action_weights").items())
    p.action_weights[static_cast<size_t>(action_from_name(k))] = v.get<double>();
  p.dwell_med_ms = j.at("dwell_med_ms").get<double>();
  p.dwell_sigma = j.at("dwell_sigma").get<double>();
  p.scroll_depth_mean = j.at("scroll_depth_mean").get<double>();
  p.search_bias = j.at("search_bias").get<double>();
  p.patience = j.at("patience").get<double>();
  p.burst_scale = j.at("burst_scale").get<double>();
  p.validate();
  return p;
}

SiteSpec site_from_json(const nlohmann::json& j) {
  SiteSpec s;
  s.id = j.at("id").get<std::string>();
  for (const auto& name : j.at("page_types")) s.page_types.push_back(page_type_from_name(name.get<std::string>()));
  for (const auto& [page, comps] : j.at("object_size_dist").items()) {
    std::vector<ObjectSizeComponent>& dst = s.object_size_dist[page_type_from_name(page)];
    for (const auto& c : comps)
      dst.push_back({c.at("weight").get<double>(), c.at("median_bytes").get<double>(),
                     c.at("sigma").get<double>()});
  }
  s.rtt_ms = j.at("rtt_ms").get<double>();
  s.ad_burst_rate = j.at("ad_burst_rate").get<double>();
  if (j.contains("mtu")) s.mtu = j.at("mtu").get<int64_t>();
  s.validate();
  return s;
}

nlohmann::json parse_profile_file(const std::filesystem::path& path) {
  nlohmann::json j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) fail("sim.bad_profile", "{} is not valid JSON", path.string());
  return j;
}

}  // namespace

PersonaSpec persona_from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) fail("sim.bad_profile", "persona document is not valid JSON");
  return persona_from_json(j);
}

std::vector<PersonaSpec> load_personas(const std::filesystem::path& path) {
  nlohmann::json j = parse_profile_file(path);
  std::vector<PersonaSpec> out;
  try {
    for (const auto& e : j.at("personas")) out.push_back(persona_from_json(e));
  } catch (const nlohmann::json::exception& e) {
    fail("sim.bad_profile", "{}: {}", path.string(), e.what());
  }
  return out;
}

std::vector<SiteSpec> load_sites(const std::filesystem::path& path) {
  nlohmann::json j = parse_profile_file(path);
  std::vector<SiteSpec> out;
  try {
    for (const auto& e : j.at("sites")) out.push_back(site_from_json(e));
  } catch (const nlohmann::json::exception& e) {
    fail("sim.bad_profile", "{}: {}", path.string(), e.what());
  }
  return out;
}

std::string action_log_line(const std::string& sess, const ActionEvent& e) {
  return fmt::format("{{\"sess\":\"{}\",\"step\":{},\"action\":\"{}\",\"page\":\"{}\",\"dwell_ms\":{}}}", sess,
                     e.step, action_name(e.action), page_type_name(e.page_type), e.dwell_ms);
}

}  // namespace pfp::sim
