// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "pfp/common/rng.hpp"
#include "pfp/trace/types.hpp"

namespace pfp::tasks {

// One split part, feature-normalized and resident in memory. Features are
// [N, 2, L] row-major (lengths channel then gaps channel per window).
struct DataPart {
  std::vector<trace::Window> windows;
  std::vector<float> features;

  int64_t size() const { return static_cast<int64_t>(windows.size()); }
  std::span<const float> feature_row(int64_t i, int64_t window_len) const {
    return {features.data() + i * 2 * window_len, static_cast<size_t>(2 * window_len)};
  }
};

struct LoadedDataset {
  trace::LabelSpace labels;
  trace::NormConfig norm;
  int64_t window_len = 0;
  DataPart train, val, test;

  const DataPart& part(trace::SplitPart p) const {
    switch (p) {
      case trace::SplitPart::train: return train;
      case trace::SplitPart::val: return val;
      default: return test;
    }
  }
};

void compute_features(DataPart& part, int64_t window_len, const trace::NormConfig& norm);

// Builds an in-memory dataset from raw per-part windows (used by tests and
// by the pipeline after the split step).
LoadedDataset assemble_dataset(trace::LabelSpace labels, trace::NormConfig norm, int64_t window_len,
                               std::vector<trace::Window> train, std::vector<trace::Window> val,
                               std::vector<trace::Window> test);

// Reads a dataset laid out as <dir>/manifest.json plus
// <dir>/windows/{train,val,test}.pfwn.
LoadedDataset load_dataset_dir(const std::filesystem::path& split_dir,
                               const std::filesystem::path& manifest_path);

// Every feature read during training goes through this loader; the per-site
// read counters make scope isolation externally checkable.
class InstrumentedLoader {
 public:
  InstrumentedLoader(const DataPart& part, int64_t window_len, size_t site_count);

  void fetch(int64_t index, std::span<float> dst);
  uint64_t reads_for_site(size_t site) const { return reads_by_site_ized_.at(site); }

 private:
  const DataPart& part_;
  int64_t window_len_;
  std::vector<uint64_t> reads_by_site_ized_;
};

// Deterministic stratified epoch order: indices grouped by (site, persona),
// each stratum shuffled, then interleaved round-robin so every batch sees a
// near-uniform class mix. Depends only on the index set and the rng, never
// on the task kind consuming it.
std::vector<int64_t> stratified_epoch_order(std::span<const int64_t> indices, const DataPart& part, Rng& rng);

}  // namespace pfp::tasks
