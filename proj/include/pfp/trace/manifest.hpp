// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pfp/trace/types.hpp"

namespace pfp::trace {

// One generated browsing session. `persona` is the label-space name, i.e. the
// open-world sessions carry the OW label here, not the unseen variant that
// produced them. trace_file is relative to the manifest's directory; several
// sessions may share one file.
struct SessionEntry {
  std::string sess;
  std::string site;
  std::string persona;
  std::string trace_file;
};

struct DatasetManifest {
  LabelSpace label_space;
  std::vector<SessionEntry> sessions;
};

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text);

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);

}  // namespace pfp::trace
