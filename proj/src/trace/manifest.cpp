// SPDX-License-Identifier: Apache-2.0
#include "pfp/trace/manifest.hpp"

#include <json.hpp>

#include "pfp/common/error.hpp"
#include "pfp/common/fsio.hpp"

namespace pfp::trace {

std::string LabelSpace::persona_name(uint16_t idx) const {
  if (idx < personas.size()) return personas[idx];
  if (has_ow && idx == personas.size()) return "OW";
  fail("labels.bad_index", "persona index {} out of range", idx);
}

std::vector<std::string> LabelSpace::persona_class_names() const {
  std::vector<std::string> names = personas;
  if (has_ow) names.push_back("OW");
  return names;
}

uint64_t LabelSpace::hash() const {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const std::string& s : sites) h = fnv1a64(s + ";", h);
  h = fnv1a64("|", h);
  for (const std::string& p : personas) h = fnv1a64(p + ";", h);
  h = fnv1a64(has_ow ? "|ow" : "|closed", h);
  return h;
}

std::string manifest_to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["label_space"] = {{"sites", m.label_space.sites},
                      {"personas", m.label_space.personas},
                      {"has_ow", m.label_space.has_ow}};
  nlohmann::json sessions = nlohmann::json::array();
  for (const SessionEntry& s : m.sessions)
    sessions.push_back({{"sess", s.sess}, {"site", s.site}, {"persona", s.persona}, {"trace_file", s.trace_file}});
  j["sessions"] = std::move(sessions);
  return j.dump(1) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) fail("manifest.malformed", "manifest is not valid JSON");
  DatasetManifest m;
  try {
    const auto& ls = j.at("label_space");
    m.label_space.sites = ls.at("sites").get<std::vector<std::string>>();
    m.label_space.personas = ls.at("personas").get<std::vector<std::string>>();
    m.label_space.has_ow = ls.at("has_ow").get<bool>();
    for (const auto& s : j.at("sessions"))
      m.sessions.push_back({s.at("sess").get<std::string>(), s.at("site").get<std::string>(),
                            s.at("persona").get<std::string>(), s.at("trace_file").get<std::string>()});
  } catch (const nlohmann::json::exception& e) {
    fail("manifest.malformed", "manifest missing fields: {}", e.what());
  }
  return m;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  return manifest_from_json(read_file(path));
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  atomic_write_file(path, manifest_to_json(m));
}

}  // namespace pfp::trace
