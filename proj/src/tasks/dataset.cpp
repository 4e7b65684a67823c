// SPDX-License-Identifier: Apache-2.0
#include "pfp/tasks/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <map>

#include "pfp/common/error.hpp"
#include "pfp/trace/manifest.hpp"
#include "pfp/trace/window_file.hpp"
#include "pfp/trace/windows.hpp"

namespace pfp::tasks {

void compute_features(DataPart& part, int64_t window_len, const trace::NormConfig& norm) {
  part.features.assign(part.windows.size() * 2 * static_cast<size_t>(window_len), 0.0f);
  for (size_t i = 0; i < part.windows.size(); ++i)
    trace::normalize_window(part.windows[i], norm,
                            {part.features.data() + i * 2 * window_len, static_cast<size_t>(2 * window_len)});
}

LoadedDataset assemble_dataset(trace::LabelSpace labels, trace::NormConfig norm, int64_t window_len,
                               std::vector<trace::Window> train, std::vector<trace::Window> val,
                               std::vector<trace::Window> test) {
  LoadedDataset ds;
  ds.labels = std::move(labels);
  ds.norm = norm;
  ds.window_len = window_len;
  ds.train.windows = std::move(train);
  ds.val.windows = std::move(val);
  ds.test.windows = std::move(test);
  for (DataPart* p : {&ds.train, &ds.val, &ds.test}) {
    for (const trace::Window& w : p->windows)
      if (static_cast<int64_t>(w.lengths.size()) != window_len)
        fail("tasks.bad_window", "window with L={} in a dataset with L={}", w.lengths.size(), window_len);
    compute_features(*p, window_len, norm);
  }
  return ds;
}

LoadedDataset load_dataset_dir(const std::filesystem::path& split_dir,
                               const std::filesystem::path& manifest_path) {
  trace::DatasetManifest manifest = trace::read_manifest(manifest_path);
  trace::WindowFile train = trace::read_windows(split_dir / "train.pfwn");
  trace::WindowFile val = trace::read_windows(split_dir / "val.pfwn");
  trace::WindowFile test = trace::read_windows(split_dir / "test.pfwn");
  if (train.window_len != val.window_len || train.window_len != test.window_len)
    fail("tasks.bad_window", "split parts disagree on window length");
  return assemble_dataset(manifest.label_space, trace::NormConfig{}, train.window_len,
                          std::move(train.windows), std::move(val.windows), std::move(test.windows));
}

InstrumentedLoader::InstrumentedLoader(const DataPart& part, int64_t window_len, size_t site_count)
    : part_(part), window_len_(window_len), reads_by_site_ized_(site_count, 0) {}

void InstrumentedLoader::fetch(int64_t index, std::span<float> dst) {
  const trace::Window& w = part_.windows[static_cast<size_t>(index)];
  if (w.site_label < reads_by_site_ized_.size()) reads_by_site_ized_[w.site_label] += 1;
  std::span<const float> src = part_.feature_row(index, window_len_);
  std::memcpy(dst.data(), src.data(), src.size() * sizeof(float));
}

std::vector<int64_t> stratified_epoch_order(std::span<const int64_t> indices, const DataPart& part, Rng& rng) {
  std::map<std::pair<uint16_t, uint16_t>, std::vector<int64_t>> strata;
  for (int64_t i : indices) {
    const trace::Window& w = part.windows[static_cast<size_t>(i)];
    strata[{w.site_label, w.persona_label}].push_back(i);
  }
  for (auto& [key, bucket] : strata) rng.shuffle(bucket);

  std::vector<int64_t> order;
  order.reserve(indices.size());
  std::vector<std::vector<int64_t>*> buckets;
  for (auto& [key, bucket] : strata) buckets.push_back(&bucket);
  std::vector<size_t> cursor(buckets.size(), 0);
  bool any = true;
  while (any) {
    any = false;
    for (size_t b = 0; b < buckets.size(); ++b) {
      if (cursor[b] < buckets[b]->size()) {
        order.push_back((*buckets[b])[cursor[b]++]);
        any = true;
      }
    }
  }
  return order;
}

}  // namespace pfp::tasks
