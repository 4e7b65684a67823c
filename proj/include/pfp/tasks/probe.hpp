// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>

#include "pfp/tasks/train.hpp"

namespace pfp::tasks {

enum class EncoderProvenance : uint8_t { wfp_trained, random_control };

const char* provenance_name(EncoderProvenance p);

struct ProbeConfig {
  int64_t hidden = 64;
  int64_t epochs = 40;
  int64_t batch = 128;
  double lr = 2e-3;
  uint64_t seed = 1;
  Openness openness = Openness::open_world;
};

struct ProbeResult {
  EncoderProvenance provenance = EncoderProvenance::wfp_trained;
  double val_acc = 0.0;
  double test_acc = 0.0;
  double val_macro_f1 = 0.0;
  double test_macro_f1 = 0.0;
  std::string budget;  // probe architecture/training budget descriptor
};

// Trains a shallow MLP probe on persona labels over the frozen encoder's
// embeddings. The encoder is hashed before and after; any parameter change is
// a hard error. The same routine serves the trained encoder and the
// random-control encoder, which enforces budget parity structurally.
// `after_embed` is a test seam invoked between embedding and the final
// freeze check.
ProbeResult probe_personas(const nn::EncoderModel<float>& frozen_encoder, EncoderProvenance provenance,
                           const LoadedDataset& ds, const ProbeConfig& cfg,
                           const std::function<void()>& after_embed = {});

// Fresh random encoder for the probing control, never trained.
nn::EncoderModel<float> make_random_control_encoder(const nn::EncoderConfig& arch, uint64_t seed);

}  // namespace pfp::tasks
