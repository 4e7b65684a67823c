// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pfp/metrics/confusion.hpp"
#include "pfp/nn/checkpoint.hpp"
#include "pfp/nn/model.hpp"
#include "pfp/tasks/dataset.hpp"

namespace pfp::tasks {

enum class TaskKind : uint8_t { site, persona, joint };
enum class Openness : uint8_t { closed, open_world };

const char* task_kind_name(TaskKind k);
const char* openness_name(Openness o);

struct TrainConfig {
  int64_t epochs = 10;
  int64_t batch = 64;
  double lr = 1e-3;
  uint64_t seed = 1;
  nn::EncoderConfig arch;
};

struct EpochLog {
  int64_t epoch = 0;
  double train_loss = 0.0;
  double val_site_acc = -1.0;     // -1 when the task has no site head
  double val_persona_acc = -1.0;  // -1 when the task has no persona head
};

struct TrainedModel {
  nn::EncoderModel<float> encoder;
  std::optional<nn::Linear<float>> site_head;
  std::optional<nn::Linear<float>> persona_head;
  std::vector<EpochLog> log;
  int64_t best_epoch = -1;

  TaskKind kind = TaskKind::site;
  Openness openness = Openness::open_world;
  std::optional<uint16_t> scope_site;
  double lambda = 0.0;
  uint64_t seed = 0;

  // Training-loader read counts per site label; scoped tasks must show zero
  // reads outside their site.
  std::vector<uint64_t> train_reads_by_site;
};

// Site classifier over all windows; model selection by best validation site
// accuracy (earlier epoch wins ties).
TrainedModel train_site_only(const LoadedDataset& ds, const TrainConfig& cfg);

// Persona classifier. With a site scope the loader touches only that site's
// windows. Closed-set drops open-world windows and predicts |P| classes;
// open_world keeps them and predicts |P|+1.
TrainedModel train_persona(const LoadedDataset& ds, std::optional<uint16_t> site_scope, Openness openness,
                           const TrainConfig& cfg);

// Shared encoder with both heads and loss L_site + lambda * L_pers. At
// lambda == 0 the persona head receives no gradient and the encoder update
// sequence is exactly the site-only one.
TrainedModel train_joint(const LoadedDataset& ds, double lambda, Openness openness, const TrainConfig& cfg);

// As train_persona, but training only sees the given train-part indices
// (used by the scaling study's subsampled budgets).
TrainedModel train_persona_subset(const LoadedDataset& ds, Openness openness, const TrainConfig& cfg,
                                  std::span<const int64_t> train_subset);

struct EvalResult {
  std::optional<metrics::ConfusionMatrix> site_cm;
  std::optional<metrics::ConfusionMatrix> persona_cm;
};

// Evaluates on a split part, honoring the model's scope and openness
// (per-site models only see their site; closed-set models skip OW windows).
EvalResult evaluate_model(const TrainedModel& model, const LoadedDataset& ds, const DataPart& part,
                          int64_t batch = 256);

// Embeds a part's windows with a (frozen) encoder; output is [N, d] row-major.
std::vector<float> embed_part(const nn::EncoderModel<float>& encoder, const LoadedDataset& ds,
                              const DataPart& part, int64_t batch = 256);

// Checkpoint glue: parameters plus metadata (arch, label-space hash, norm,
// task). Loading rejects checkpoints whose label-space hash differs.
nn::Checkpoint to_checkpoint(const TrainedModel& model, const LoadedDataset& ds);
TrainedModel model_from_checkpoint(const nn::Checkpoint& ckpt);
uint64_t checkpoint_label_hash(const nn::Checkpoint& ckpt);

}  // namespace pfp::tasks
