// SPDX-License-Identifier: Apache-2.0
#include "pfp/tasks/train.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "pfp/common/fsio.hpp"
#include "pfp/nn/loss.hpp"
#include "pfp/nn/optimizer.hpp"

namespace pfp::tasks {

namespace {

struct Plan {
  TaskKind kind = TaskKind::site;
  bool use_site = false;
  bool use_persona = false;
  double lambda = 1.0;  // persona loss weight (1 for persona-only tasks)
  Openness openness = Openness::open_world;
  std::optional<uint16_t> scope_site;
};

// Train/eval index set for a plan: applies the site scope and, for closed-set
// persona tasks, drops open-world windows.
std::vector<int64_t> plan_indices(const DataPart& part, const LoadedDataset& ds, const Plan& plan) {
  std::vector<int64_t> idx;
  const uint16_t ow = ds.labels.ow_index();
  for (int64_t i = 0; i < part.size(); ++i) {
    const trace::Window& w = part.windows[static_cast<size_t>(i)];
    if (plan.scope_site && w.site_label != *plan.scope_site) continue;
    if (plan.use_persona && plan.openness == Openness::closed && w.persona_label >= ow) continue;
    idx.push_back(i);
  }
  return idx;
}

int64_t persona_class_count(const LoadedDataset& ds, Openness openness) {
  return openness == Openness::open_world ? static_cast<int64_t>(ds.labels.persona_class_count())
                                          : static_cast<int64_t>(ds.labels.personas.size());
}

void gather_batch(InstrumentedLoader& loader, const DataPart& part, std::span<const int64_t> idx,
                  int64_t window_len, nn::Tensor<float>& x, std::vector<int32_t>& y_site,
                  std::vector<int32_t>& y_pers) {
  const int64_t B = static_cast<int64_t>(idx.size());
  x = nn::Tensor<float>({B, 2, window_len});
  y_site.resize(idx.size());
  y_pers.resize(idx.size());
  for (int64_t b = 0; b < B; ++b) {
    loader.fetch(idx[b], {&x.data[b * 2 * window_len], static_cast<size_t>(2 * window_len)});
    const trace::Window& w = part.windows[static_cast<size_t>(idx[b])];
    y_site[b] = w.site_label;
    y_pers[b] = w.persona_label;
  }
}

struct Heads {
  std::optional<nn::Linear<float>> site;
  std::optional<nn::Linear<float>> persona;
};

struct Snapshot {
  nn::EncoderModel<float> encoder;
  Heads heads;
};

double head_accuracy(const nn::EncoderModel<float>& enc, const nn::Linear<float>& head,
                     const LoadedDataset& ds, const DataPart& part, std::span<const int64_t> idx,
                     bool persona_labels, int64_t batch) {
  if (idx.empty()) return 0.0;
  InstrumentedLoader loader(part, ds.window_len, ds.labels.sites.size());
  int64_t correct = 0;
  nn::Tensor<float> x;
  std::vector<int32_t> ys, yp;
  for (size_t start = 0; start < idx.size(); start += static_cast<size_t>(batch)) {
    size_t end = std::min(idx.size(), start + static_cast<size_t>(batch));
    gather_batch(loader, part, idx.subspan(start, end - start), ds.window_len, x, ys, yp);
    nn::Tensor<float> z = nn::encoder_forward(enc, x);
    nn::Tensor<float> logits = nn::linear_forward(head, z);
    const std::vector<int32_t>& y = persona_labels ? yp : ys;
    for (int64_t b = 0; b < static_cast<int64_t>(end - start); ++b)
      if (nn::argmax_row(logits, b) == y[static_cast<size_t>(b)]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(idx.size());
}

TrainedModel train_core(const LoadedDataset& ds, const Plan& plan, const TrainConfig& cfg,
                        std::span<const int64_t> train_subset) {
  if (cfg.epochs < 1) fail("tasks.bad_config", "epochs must be >= 1");
  if (cfg.batch < 1) fail("tasks.bad_config", "batch must be >= 1");
  if (plan.lambda < 0.0) fail("tasks.bad_lambda", "persona loss weight must be >= 0, got {}", plan.lambda);
  if (plan.scope_site && *plan.scope_site >= ds.labels.sites.size())
    fail("tasks.bad_scope", "site scope {} out of range", *plan.scope_site);

  std::vector<int64_t> train_idx;
  if (train_subset.empty()) {
    train_idx = plan_indices(ds.train, ds, plan);
  } else {
    train_idx.assign(train_subset.begin(), train_subset.end());
  }
  if (train_idx.empty()) fail("tasks.empty_split", "no training windows for this task");
  std::vector<int64_t> val_idx = plan_indices(ds.val, ds, plan);

  // Both heads need at least two observed classes to learn anything.
  if (plan.use_site) {
    std::set<uint16_t> sites;
    for (int64_t i : train_idx) sites.insert(ds.train.windows[static_cast<size_t>(i)].site_label);
    if (sites.size() < 2) fail("tasks.single_class", "site task with {} distinct site(s)", sites.size());
  }
  if (plan.use_persona) {
    std::set<uint16_t> personas;
    for (int64_t i : train_idx) personas.insert(ds.train.windows[static_cast<size_t>(i)].persona_label);
    if (personas.size() < 2) fail("tasks.single_class", "persona task with {} distinct persona(s)", personas.size());
    if (plan.openness == Openness::open_world) {
      bool any_ow = false;
      for (int64_t i : train_idx)
        any_ow |= ds.train.windows[static_cast<size_t>(i)].persona_label == ds.labels.ow_index();
      if (!any_ow) fail("tasks.no_ow_windows", "open-world persona task but the dataset has no OW windows");
    }
  }

  TrainedModel model;
  model.kind = plan.kind;
  model.openness = plan.openness;
  model.scope_site = plan.scope_site;
  model.lambda = plan.kind == TaskKind::joint ? plan.lambda : 0.0;
  model.seed = cfg.seed;

  // Independent init streams: adding or removing a head never shifts the
  // draws of the others (the lambda=0 reduction depends on this).
  {
    Rng enc_rng(derive_seed(cfg.seed, "encoder_init"));
    model.encoder = nn::make_encoder<float>(cfg.arch, enc_rng);
  }
  Heads heads;
  const int64_t d = model.encoder.embed_dim();
  if (plan.use_site) {
    Rng rng(derive_seed(cfg.seed, "site_head_init"));
    heads.site = nn::make_linear<float>(d, static_cast<int64_t>(ds.labels.sites.size()), rng);
  }
  if (plan.use_persona) {
    Rng rng(derive_seed(cfg.seed, "persona_head_init"));
    heads.persona = nn::make_linear<float>(d, persona_class_count(ds, plan.openness), rng);
  }

  nn::Adam<float> adam({cfg.lr, 0.9, 0.999, 1e-8});
  InstrumentedLoader loader(ds.train, ds.window_len, ds.labels.sites.size());

  // Persona loss is skipped entirely at lambda == 0: zero gradient either way.
  const bool step_persona = plan.use_persona && !(plan.kind == TaskKind::joint && plan.lambda == 0.0);

  Snapshot best;
  double best_metric = -1.0;

  nn::EncoderModel<float> enc_grads = nn::zeros_like(model.encoder);
  nn::Linear<float> site_grads, pers_grads;
  if (heads.site) site_grads = nn::zeros_like(*heads.site);
  if (heads.persona) pers_grads = nn::zeros_like(*heads.persona);

  nn::Tensor<float> x;
  std::vector<int32_t> y_site, y_pers;
  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, "epoch_shuffle", static_cast<uint64_t>(epoch)));
    std::vector<int64_t> order = stratified_epoch_order(train_idx, ds.train, shuffle_rng);

    double loss_sum = 0.0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch)) {
      size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch));
      std::span<const int64_t> batch_idx(order.data() + start, end - start);
      gather_batch(loader, ds.train, batch_idx, ds.window_len, x, y_site, y_pers);

      nn::EncoderCache<float> cache;
      nn::Tensor<float> z = nn::encoder_forward(model.encoder, x, &cache);
      nn::Tensor<float> dz({z.shape[0], z.shape[1]});
      double batch_loss = 0.0;

      if (heads.site) {
        nn::Tensor<float> logits = nn::linear_forward(*heads.site, z);
        auto res = nn::softmax_cross_entropy(logits, y_site);
        batch_loss += res.loss;
        site_grads.weight.zero();
        site_grads.bias.zero();
        nn::Tensor<float> dzs = nn::linear_backward(*heads.site, z, res.grad_logits, site_grads);
        for (size_t i = 0; i < dz.data.size(); ++i) dz.data[i] += dzs.data[i];
      }
      if (step_persona) {
        nn::Tensor<float> logits = nn::linear_forward(*heads.persona, z);
        auto res = nn::softmax_cross_entropy(logits, y_pers);
        const double w = plan.kind == TaskKind::joint ? plan.lambda : 1.0;
        batch_loss += w * res.loss;
        if (w != 1.0)
          for (float& g : res.grad_logits.data) g = static_cast<float>(g * w);
        pers_grads.weight.zero();
        pers_grads.bias.zero();
        nn::Tensor<float> dzp = nn::linear_backward(*heads.persona, z, res.grad_logits, pers_grads);
        for (size_t i = 0; i < dz.data.size(); ++i) dz.data[i] += dzp.data[i];
      }

      for (auto& block : enc_grads.blocks) {
        block.conv.weight.zero();
        block.conv.bias.zero();
      }
      nn::encoder_backward(model.encoder, cache, dz, enc_grads);

      std::vector<nn::NamedParam<float>> params, grads;
      nn::collect_params(model.encoder, "enc", params);
      nn::collect_params(enc_grads, "enc", grads);
      if (heads.site) {
        nn::collect_params(*heads.site, "site_head", params);
        nn::collect_params(site_grads, "site_head", grads);
      }
      if (step_persona) {
        nn::collect_params(*heads.persona, "persona_head", params);
        nn::collect_params(pers_grads, "persona_head", grads);
      }
      for (size_t p = 0; p < params.size(); ++p) adam.step(params[p].name, *params[p].tensor, *grads[p].tensor);

      loss_sum += batch_loss * static_cast<double>(batch_idx.size());
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(order.size());
    if (heads.site)
      log.val_site_acc = head_accuracy(model.encoder, *heads.site, ds, ds.val, val_idx, false, 256);
    if (heads.persona)
      log.val_persona_acc = head_accuracy(model.encoder, *heads.persona, ds, ds.val, val_idx, true, 256);
    model.log.push_back(log);

    // Selection metric mirrors the training objective's weighting, so the
    // lambda=0 joint run selects exactly like the site-only run.
    double metric = 0.0;
    if (heads.site) metric += log.val_site_acc;
    if (heads.persona) metric += (plan.kind == TaskKind::joint ? plan.lambda : 1.0) * log.val_persona_acc;
    if (metric > best_metric) {
      best_metric = metric;
      best.encoder = model.encoder;
      best.heads.site = heads.site;
      best.heads.persona = heads.persona;
      model.best_epoch = epoch;
    }
  }

  model.encoder = std::move(best.encoder);
  model.site_head = std::move(best.heads.site);
  model.persona_head = std::move(best.heads.persona);
  for (size_t s = 0; s < ds.labels.sites.size(); ++s)
    model.train_reads_by_site.push_back(loader.reads_for_site(s));
  return model;
}

}  // namespace

const char* task_kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::site: return "site";
    case TaskKind::persona: return "persona";
    case TaskKind::joint: return "joint";
  }
  return "?";
}

const char* openness_name(Openness o) { return o == Openness::closed ? "closed" : "open_world"; }

TrainedModel train_site_only(const LoadedDataset& ds, const TrainConfig& cfg) {
  Plan plan;
  plan.kind = TaskKind::site;
  plan.use_site = true;
  return train_core(ds, plan, cfg, {});
}

TrainedModel train_persona(const LoadedDataset& ds, std::optional<uint16_t> site_scope, Openness openness,
                           const TrainConfig& cfg) {
  Plan plan;
  plan.kind = TaskKind::persona;
  plan.use_persona = true;
  plan.openness = openness;
  plan.scope_site = site_scope;
  return train_core(ds, plan, cfg, {});
}

TrainedModel train_joint(const LoadedDataset& ds, double lambda, Openness openness, const TrainConfig& cfg) {
  Plan plan;
  plan.kind = TaskKind::joint;
  plan.use_site = true;
  plan.use_persona = true;
  plan.lambda = lambda;
  plan.openness = openness;
  return train_core(ds, plan, cfg, {});
}

TrainedModel train_persona_subset(const LoadedDataset& ds, Openness openness, const TrainConfig& cfg,
                                  std::span<const int64_t> train_subset) {
  Plan plan;
  plan.kind = TaskKind::persona;
  plan.use_persona = true;
  plan.openness = openness;
  return train_core(ds, plan, cfg, train_subset);
}

EvalResult evaluate_model(const TrainedModel& model, const LoadedDataset& ds, const DataPart& part,
                          int64_t batch) {
  Plan plan;
  plan.kind = model.kind;
  plan.use_site = model.site_head.has_value();
  plan.use_persona = model.persona_head.has_value();
  plan.openness = model.openness;
  plan.scope_site = model.scope_site;
  std::vector<int64_t> idx = plan_indices(part, ds, plan);
  if (idx.empty()) fail("tasks.empty_split", "no windows to evaluate");

  EvalResult out;
  std::vector<int32_t> site_preds, site_truths, pers_preds, pers_truths;
  InstrumentedLoader loader(part, ds.window_len, ds.labels.sites.size());
  nn::Tensor<float> x;
  std::vector<int32_t> ys, yp;
  for (size_t start = 0; start < idx.size(); start += static_cast<size_t>(batch)) {
    size_t end = std::min(idx.size(), start + static_cast<size_t>(batch));
    gather_batch(loader, part, std::span<const int64_t>(idx.data() + start, end - start), ds.window_len, x,
                 ys, yp);
    nn::Tensor<float> z = nn::encoder_forward(model.encoder, x);
    if (model.site_head) {
      nn::Tensor<float> logits = nn::linear_forward(*model.site_head, z);
      for (int64_t b = 0; b < static_cast<int64_t>(end - start); ++b) {
        site_preds.push_back(nn::argmax_row(logits, b));
        site_truths.push_back(ys[static_cast<size_t>(b)]);
      }
    }
    if (model.persona_head) {
      nn::Tensor<float> logits = nn::linear_forward(*model.persona_head, z);
      for (int64_t b = 0; b < static_cast<int64_t>(end - start); ++b) {
        pers_preds.push_back(nn::argmax_row(logits, b));
        pers_truths.push_back(yp[static_cast<size_t>(b)]);
      }
    }
  }
  if (model.site_head)
    out.site_cm = metrics::ConfusionMatrix::from_pairs(ds.labels.sites, site_preds, site_truths);
  if (model.persona_head) {
    std::vector<std::string> names = model.openness == Openness::open_world
                                         ? ds.labels.persona_class_names()
                                         : ds.labels.personas;
    out.persona_cm = metrics::ConfusionMatrix::from_pairs(std::move(names), pers_preds, pers_truths);
  }
  return out;
}

std::vector<float> embed_part(const nn::EncoderModel<float>& encoder, const LoadedDataset& ds,
                              const DataPart& part, int64_t batch) {
  const int64_t d = encoder.embed_dim();
  std::vector<float> out(static_cast<size_t>(part.size()) * static_cast<size_t>(d));
  InstrumentedLoader loader(part, ds.window_len, ds.labels.sites.size());
  nn::Tensor<float> x;
  std::vector<int32_t> ys, yp;
  std::vector<int64_t> idx(part.size());
  for (int64_t i = 0; i < part.size(); ++i) idx[static_cast<size_t>(i)] = i;
  for (size_t start = 0; start < idx.size(); start += static_cast<size_t>(batch)) {
    size_t end = std::min(idx.size(), start + static_cast<size_t>(batch));
    gather_batch(loader, part, std::span<const int64_t>(idx.data() + start, end - start), ds.window_len, x,
                 ys, yp);
    nn::Tensor<float> z = nn::encoder_forward(encoder, x);
    std::copy(z.data.begin(), z.data.end(), out.begin() + static_cast<int64_t>(start) * d);
  }
  return out;
}

nn::Checkpoint to_checkpoint(const TrainedModel& model, const LoadedDataset& ds) {
  nn::Checkpoint ckpt;
  auto add = [&](const std::string& name, const nn::Tensor<float>& t) {
    nn::CheckpointEntry e;
    e.name = name;
    for (int64_t dim : t.shape) e.shape.push_back(static_cast<uint32_t>(dim));
    e.data = t.data;
    ckpt.entries.push_back(std::move(e));
  };
  std::vector<nn::NamedParam<float>> params;
  nn::collect_params(const_cast<nn::EncoderModel<float>&>(model.encoder), "enc", params);
  if (model.site_head)
    nn::collect_params(const_cast<nn::Linear<float>&>(*model.site_head), "site_head", params);
  if (model.persona_head)
    nn::collect_params(const_cast<nn::Linear<float>&>(*model.persona_head), "persona_head", params);
  for (const auto& p : params) add(p.name, *p.tensor);

  nlohmann::json arch;
  arch["in_channels"] = 2;
  std::vector<int64_t> channels;
  int64_t kernel = 0, stride = 1, pool = 1;
  for (const auto& b : model.encoder.blocks) {
    channels.push_back(b.conv.out_ch);
    kernel = b.conv.kernel;
    stride = b.conv.stride;
    pool = b.pool_factor;
  }
  arch["channels"] = channels;
  arch["kernel"] = kernel;
  arch["stride"] = stride;
  arch["pool_factor"] = pool;
  arch["global_pool"] = model.encoder.global_pool == nn::GlobalPool::avg ? "avg" : "max";

  ckpt.metadata["format_version"] = 1;
  ckpt.metadata["label_space_hash"] = to_hex(ds.labels.hash());
  ckpt.metadata["norm"] = {{"len_scale", ds.norm.len_scale},
                           {"gap_unit_us", ds.norm.gap_unit_us},
                           {"gap_log_saturation", ds.norm.gap_log_saturation}};
  ckpt.metadata["arch"] = std::move(arch);
  ckpt.metadata["task"] = task_kind_name(model.kind);
  ckpt.metadata["openness"] = openness_name(model.openness);
  ckpt.metadata["lambda"] = model.lambda;
  ckpt.metadata["best_epoch"] = model.best_epoch;
  ckpt.metadata["seed"] = model.seed;
  if (model.scope_site) ckpt.metadata["scope_site"] = *model.scope_site;
  return ckpt;
}

TrainedModel model_from_checkpoint(const nn::Checkpoint& ckpt) {
  TrainedModel model;
  const nlohmann::json& meta = ckpt.metadata;
  const nlohmann::json& arch = meta.at("arch");

  std::string task = meta.at("task").get<std::string>();
  model.kind = task == "site" ? TaskKind::site : task == "persona" ? TaskKind::persona : TaskKind::joint;
  model.openness = meta.at("openness").get<std::string>() == "closed" ? Openness::closed : Openness::open_world;
  model.lambda = meta.value("lambda", 0.0);
  model.best_epoch = meta.value("best_epoch", -1);
  model.seed = meta.value("seed", 0ull);
  if (meta.contains("scope_site")) model.scope_site = meta.at("scope_site").get<uint16_t>();

  model.encoder.global_pool =
      arch.at("global_pool").get<std::string>() == "max" ? nn::GlobalPool::max : nn::GlobalPool::avg;
  auto load_tensor = [&](const std::string& name) {
    const nn::CheckpointEntry& e = ckpt.entry(name);
    std::vector<int64_t> shape(e.shape.begin(), e.shape.end());
    nn::Tensor<float> t(shape);
    t.data = e.data;
    return t;
  };
  int64_t in_ch = arch.at("in_channels").get<int64_t>();
  size_t i = 0;
  for (int64_t ch : arch.at("channels").get<std::vector<int64_t>>()) {
    nn::EncoderModel<float>::Block b;
    b.conv.in_ch = in_ch;
    b.conv.out_ch = ch;
    b.conv.kernel = arch.at("kernel").get<int64_t>();
    b.conv.stride = arch.at("stride").get<int64_t>();
    b.pool_factor = arch.at("pool_factor").get<int64_t>();
    b.conv.weight = load_tensor(fmt::format("enc.block{}.weight", i));
    b.conv.bias = load_tensor(fmt::format("enc.block{}.bias", i));
    model.encoder.blocks.push_back(std::move(b));
    in_ch = ch;
    ++i;
  }
  auto maybe_head = [&](const std::string& prefix) -> std::optional<nn::Linear<float>> {
    for (const auto& e : ckpt.entries)
      if (e.name == prefix + ".weight") {
        nn::Linear<float> l;
        l.weight = load_tensor(prefix + ".weight");
        l.bias = load_tensor(prefix + ".bias");
        l.out_dim = l.weight.shape[0];
        l.in_dim = l.weight.shape[1];
        return l;
      }
    return std::nullopt;
  };
  model.site_head = maybe_head("site_head");
  model.persona_head = maybe_head("persona_head");
  return model;
}

uint64_t checkpoint_label_hash(const nn::Checkpoint& ckpt) {
  std::string hex = ckpt.metadata.at("label_space_hash").get<std::string>();
  return std::stoull(hex, nullptr, 16);
}

}  // namespace pfp::tasks
