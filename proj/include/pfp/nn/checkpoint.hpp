// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace pfp::nn {

inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  std::vector<uint32_t> shape;
  std::vector<float> data;
};

// Named f32 parameter arrays plus a free-form JSON metadata blob (format
// version, label-space hash, normalization, architecture). Round trips are
// bit-identical on parameters.
struct Checkpoint {
  std::vector<CheckpointEntry> entries;
  nlohmann::json metadata;

  const CheckpointEntry& entry(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pfp::nn
