// SPDX-License-Identifier: Apache-2.0
#include "pfp/tasks/probe.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "pfp/nn/loss.hpp"
#include "pfp/nn/optimizer.hpp"

namespace pfp::tasks {

namespace {

struct EmbeddedPart {
  std::vector<float> z;           // [N, d]
  std::vector<int32_t> labels;    // persona labels
  std::vector<int64_t> indices;   // source indices (after openness filter)
  int64_t d = 0;

  int64_t size() const { return static_cast<int64_t>(labels.size()); }
};

EmbeddedPart embed_filtered(const nn::EncoderModel<float>& enc, const LoadedDataset& ds, const DataPart& part,
                            Openness openness) {
  EmbeddedPart out;
  out.d = enc.embed_dim();
  std::vector<float> all = embed_part(enc, ds, part);
  const uint16_t ow = ds.labels.ow_index();
  for (int64_t i = 0; i < part.size(); ++i) {
    const trace::Window& w = part.windows[static_cast<size_t>(i)];
    if (openness == Openness::closed && w.persona_label >= ow) continue;
    out.indices.push_back(i);
    out.labels.push_back(w.persona_label);
    out.z.insert(out.z.end(), all.begin() + i * out.d, all.begin() + (i + 1) * out.d);
  }
  return out;
}

double probe_accuracy(const nn::MlpProbe<float>& probe, const EmbeddedPart& part) {
  if (part.size() == 0) return 0.0;
  nn::Tensor<float> x({part.size(), part.d});
  x.data.assign(part.z.begin(), part.z.end());
  nn::Tensor<float> h = nn::linear_forward(probe.hidden, x);
  nn::relu_inplace(h);
  nn::Tensor<float> logits = nn::linear_forward(probe.output, h);
  int64_t correct = 0;
  for (int64_t b = 0; b < part.size(); ++b)
    if (nn::argmax_row(logits, b) == part.labels[static_cast<size_t>(b)]) ++correct;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(part.size());
}

metrics::ConfusionMatrix probe_confusion(const nn::MlpProbe<float>& probe, const EmbeddedPart& part,
                                         std::vector<std::string> names) {
  nn::Tensor<float> x({part.size(), part.d});
  x.data.assign(part.z.begin(), part.z.end());
  nn::Tensor<float> h = nn::linear_forward(probe.hidden, x);
  nn::relu_inplace(h);
  nn::Tensor<float> logits = nn::linear_forward(probe.output, h);
  std::vector<int32_t> preds(part.labels.size());
  for (int64_t b = 0; b < part.size(); ++b) preds[static_cast<size_t>(b)] = nn::argmax_row(logits, b);
  return metrics::ConfusionMatrix::from_pairs(std::move(names), preds, part.labels);
}

}  // namespace

const char* provenance_name(EncoderProvenance p) {
  return p == EncoderProvenance::wfp_trained ? "wfp_trained" : "random_control";
}

nn::EncoderModel<float> make_random_control_encoder(const nn::EncoderConfig& arch, uint64_t seed) {
  Rng rng(derive_seed(seed, "random_control_encoder"));
  return nn::make_encoder<float>(arch, rng);
}

ProbeResult probe_personas(const nn::EncoderModel<float>& frozen_encoder, EncoderProvenance provenance,
                           const LoadedDataset& ds, const ProbeConfig& cfg,
                           const std::function<void()>& after_embed) {
  if (cfg.hidden < 1) fail("tasks.bad_config", "probe hidden width must be >= 1");
  const uint64_t hash_before = nn::param_hash(frozen_encoder);

  EmbeddedPart train = embed_filtered(frozen_encoder, ds, ds.train, cfg.openness);
  EmbeddedPart val = embed_filtered(frozen_encoder, ds, ds.val, cfg.openness);
  EmbeddedPart test = embed_filtered(frozen_encoder, ds, ds.test, cfg.openness);
  if (train.size() == 0) fail("tasks.empty_split", "no training windows to probe");

  if (after_embed) after_embed();

  const int64_t classes = cfg.openness == Openness::open_world
                              ? static_cast<int64_t>(ds.labels.persona_class_count())
                              : static_cast<int64_t>(ds.labels.personas.size());
  Rng init_rng(derive_seed(cfg.seed, "probe_init"));
  nn::MlpProbe<float> probe = nn::make_probe<float>(train.d, cfg.hidden, classes, init_rng);
  nn::MlpProbe<float> best = probe;
  double best_val = -1.0;

  nn::Adam<float> adam({cfg.lr, 0.9, 0.999, 1e-8});
  nn::MlpProbe<float> grads;
  grads.hidden = nn::zeros_like(probe.hidden);
  grads.output = nn::zeros_like(probe.output);

  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, "probe_shuffle", static_cast<uint64_t>(epoch)));
    std::vector<int64_t> order(static_cast<size_t>(train.size()));
    for (int64_t i = 0; i < train.size(); ++i) order[static_cast<size_t>(i)] = i;
    shuffle_rng.shuffle(order);

    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch)) {
      size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch));
      const int64_t B = static_cast<int64_t>(end - start);
      nn::Tensor<float> x({B, train.d});
      std::vector<int32_t> y(static_cast<size_t>(B));
      for (int64_t b = 0; b < B; ++b) {
        int64_t src = order[start + static_cast<size_t>(b)];
        std::copy(train.z.begin() + src * train.d, train.z.begin() + (src + 1) * train.d,
                  x.data.begin() + b * train.d);
        y[static_cast<size_t>(b)] = train.labels[static_cast<size_t>(src)];
      }
      nn::Tensor<float> h_pre = nn::linear_forward(probe.hidden, x);
      nn::Tensor<float> h = h_pre;
      nn::relu_inplace(h);
      nn::Tensor<float> logits = nn::linear_forward(probe.output, h);
      auto res = nn::softmax_cross_entropy(logits, y);

      grads.hidden.weight.zero();
      grads.hidden.bias.zero();
      grads.output.weight.zero();
      grads.output.bias.zero();
      nn::Tensor<float> dh = nn::linear_backward(probe.output, h, res.grad_logits, grads.output);
      nn::relu_backward_inplace(h, dh);
      nn::linear_backward(probe.hidden, x, dh, grads.hidden);

      adam.step("probe.hidden.weight", probe.hidden.weight, grads.hidden.weight);
      adam.step("probe.hidden.bias", probe.hidden.bias, grads.hidden.bias);
      adam.step("probe.output.weight", probe.output.weight, grads.output.weight);
      adam.step("probe.output.bias", probe.output.bias, grads.output.bias);
    }

    double val_acc = probe_accuracy(probe, val);
    if (val_acc > best_val) {
      best_val = val_acc;
      best = probe;
    }
  }

  const uint64_t hash_after = nn::param_hash(frozen_encoder);
  if (hash_before != hash_after)
    fail("tasks.encoder_mutated", "frozen encoder parameters changed during probing");

  std::vector<std::string> names =
      cfg.openness == Openness::open_world ? ds.labels.persona_class_names() : ds.labels.personas;

  ProbeResult result;
  result.provenance = provenance;
  result.val_acc = probe_accuracy(best, val);
  result.test_acc = probe_accuracy(best, test);
  if (val.size() > 0) result.val_macro_f1 = metrics::macro_f1_pct(probe_confusion(best, val, names));
  if (test.size() > 0) result.test_macro_f1 = metrics::macro_f1_pct(probe_confusion(best, test, names));
  result.budget = fmt::format("mlp(hidden={},epochs={},batch={},lr={})", cfg.hidden, cfg.epochs, cfg.batch,
                              cfg.lr);
  return result;
}

}  // namespace pfp::tasks
