// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pfp/common/fsio.hpp"
#include "pfp/nn/layers.hpp"

namespace pfp::nn {

enum class GlobalPool : uint8_t { avg, max };

struct EncoderConfig {
  int64_t in_channels = 2;
  std::vector<int64_t> channels = {32, 64, 128};
  int64_t kernel = 8;
  int64_t stride = 1;
  int64_t pool_factor = 4;
  GlobalPool global_pool = GlobalPool::avg;
};

// Conv blocks (conv -> relu -> maxpool) followed by a global pool; maps
// [B, in_ch, T] windows to [B, d] embeddings with d = last channel width.
template <typename S>
struct EncoderModel {
  struct Block {
    Conv1d<S> conv;
    int64_t pool_factor = 1;
  };
  std::vector<Block> blocks;
  GlobalPool global_pool = GlobalPool::avg;

  int64_t embed_dim() const { return blocks.empty() ? 0 : blocks.back().conv.out_ch; }

  template <typename T>
  EncoderModel<T> cast() const {
    EncoderModel<T> out;
    out.global_pool = global_pool;
    for (const Block& b : blocks) {
      typename EncoderModel<T>::Block nb;
      nb.pool_factor = b.pool_factor;
      nb.conv.in_ch = b.conv.in_ch;
      nb.conv.out_ch = b.conv.out_ch;
      nb.conv.kernel = b.conv.kernel;
      nb.conv.stride = b.conv.stride;
      nb.conv.weight = b.conv.weight.template cast<T>();
      nb.conv.bias = b.conv.bias.template cast<T>();
      out.blocks.push_back(std::move(nb));
    }
    return out;
  }
};

template <typename S>
EncoderModel<S> make_encoder(const EncoderConfig& cfg, Rng& rng) {
  EncoderModel<S> m;
  m.global_pool = cfg.global_pool;
  int64_t in_ch = cfg.in_channels;
  for (int64_t ch : cfg.channels) {
    typename EncoderModel<S>::Block b;
    b.conv = make_conv1d<S>(in_ch, ch, cfg.kernel, cfg.stride, rng);
    b.pool_factor = cfg.pool_factor;
    m.blocks.push_back(std::move(b));
    in_ch = ch;
  }
  return m;
}

// Zero-filled twin used as a gradient accumulator.
template <typename S>
EncoderModel<S> zeros_like(const EncoderModel<S>& m) {
  EncoderModel<S> g;
  g.global_pool = m.global_pool;
  for (const auto& b : m.blocks) {
    typename EncoderModel<S>::Block nb;
    nb.pool_factor = b.pool_factor;
    nb.conv.in_ch = b.conv.in_ch;
    nb.conv.out_ch = b.conv.out_ch;
    nb.conv.kernel = b.conv.kernel;
    nb.conv.stride = b.conv.stride;
    nb.conv.weight = Tensor<S>(b.conv.weight.shape);
    nb.conv.bias = Tensor<S>(b.conv.bias.shape);
    g.blocks.push_back(std::move(nb));
  }
  return g;
}

template <typename S>
Linear<S> zeros_like(const Linear<S>& l) {
  Linear<S> g;
  g.in_dim = l.in_dim;
  g.out_dim = l.out_dim;
  g.weight = Tensor<S>(l.weight.shape);
  g.bias = Tensor<S>(l.bias.shape);
  return g;
}

template <typename S>
struct EncoderCache {
  std::vector<Tensor<S>> conv_in;               // input of each conv
  std::vector<Tensor<S>> relu_out;              // post-relu activations
  std::vector<std::vector<int32_t>> pool_idx;   // maxpool argmax per block
  std::vector<std::vector<int64_t>> pre_pool_shape;
  std::vector<int32_t> gpool_idx;               // global max pool argmax
  std::vector<int64_t> gpool_in_shape;
};

template <typename S>
Tensor<S> encoder_forward(const EncoderModel<S>& m, const Tensor<S>& x, EncoderCache<S>* cache = nullptr) {
  Tensor<S> h = x;
  if (cache) {
    cache->conv_in.clear();
    cache->relu_out.clear();
    cache->pool_idx.clear();
    cache->pre_pool_shape.clear();
  }
  for (const auto& b : m.blocks) {
    if (cache) cache->conv_in.push_back(h);
    Tensor<S> y = conv1d_forward(b.conv, h);
    relu_inplace(y);
    if (cache) cache->relu_out.push_back(y);
    if (b.pool_factor > 1) {
      std::vector<int32_t> idx;
      if (cache) cache->pre_pool_shape.push_back(y.shape);
      Tensor<S> p = maxpool1d_forward(y, b.pool_factor, cache ? &idx : nullptr);
      if (cache) cache->pool_idx.push_back(std::move(idx));
      h = std::move(p);
    } else {
      if (cache) {
        cache->pre_pool_shape.push_back(y.shape);
        cache->pool_idx.emplace_back();
      }
      h = std::move(y);
    }
  }
  if (cache) cache->gpool_in_shape = h.shape;
  if (m.global_pool == GlobalPool::avg) return global_avg_pool_forward(h);
  std::vector<int32_t> idx;
  Tensor<S> z = global_max_pool_forward(h, cache ? &idx : nullptr);
  if (cache) cache->gpool_idx = std::move(idx);
  return z;
}

// Backward through the whole encoder; parameter grads accumulate into
// `grads`. The input gradient is not materialized (windows are leaves).
template <typename S>
void encoder_backward(const EncoderModel<S>& m, const EncoderCache<S>& cache, const Tensor<S>& dz,
                      EncoderModel<S>& grads) {
  Tensor<S> dh = m.global_pool == GlobalPool::avg
                     ? global_avg_pool_backward(cache.gpool_in_shape, dz)
                     : global_max_pool_backward(cache.gpool_in_shape, cache.gpool_idx, dz);
  for (int64_t i = static_cast<int64_t>(m.blocks.size()) - 1; i >= 0; --i) {
    const auto& b = m.blocks[i];
    Tensor<S> dy = b.pool_factor > 1
                       ? maxpool1d_backward(cache.pre_pool_shape[i], b.pool_factor, cache.pool_idx[i], dh)
                       : std::move(dh);
    relu_backward_inplace(cache.relu_out[i], dy);
    dh = conv1d_backward(b.conv, cache.conv_in[i], dy, grads.blocks[i].conv);
  }
}

// Shallow two-layer probe trained on frozen embeddings.
template <typename S>
struct MlpProbe {
  Linear<S> hidden;
  Linear<S> output;
};

template <typename S>
MlpProbe<S> make_probe(int64_t in_dim, int64_t hidden_dim, int64_t classes, Rng& rng) {
  if (hidden_dim < 1) fail("nn.bad_probe", "probe hidden width must be >= 1");
  MlpProbe<S> p;
  p.hidden = make_linear<S>(in_dim, hidden_dim, rng);
  p.output = make_linear<S>(hidden_dim, classes, rng);
  return p;
}

// ---------------------------------------------------------------------------
// Named parameter traversal (optimizer, checkpoints, gradient checks)
// ---------------------------------------------------------------------------

template <typename S>
struct NamedParam {
  std::string name;
  Tensor<S>* tensor;
};

template <typename S>
void collect_params(EncoderModel<S>& m, const std::string& prefix, std::vector<NamedParam<S>>& out) {
  for (size_t i = 0; i < m.blocks.size(); ++i) {
    out.push_back({prefix + ".block" + std::to_string(i) + ".weight", &m.blocks[i].conv.weight});
    out.push_back({prefix + ".block" + std::to_string(i) + ".bias", &m.blocks[i].conv.bias});
  }
}

template <typename S>
void collect_params(Linear<S>& l, const std::string& prefix, std::vector<NamedParam<S>>& out) {
  out.push_back({prefix + ".weight", &l.weight});
  out.push_back({prefix + ".bias", &l.bias});
}

template <typename S>
void collect_params(MlpProbe<S>& p, const std::string& prefix, std::vector<NamedParam<S>>& out) {
  collect_params(p.hidden, prefix + ".hidden", out);
  collect_params(p.output, prefix + ".output", out);
}

template <typename S>
int64_t param_count(const EncoderModel<S>& m) {
  int64_t n = 0;
  for (const auto& b : m.blocks) n += b.conv.weight.numel() + b.conv.bias.numel();
  return n;
}

template <typename S>
int64_t param_count(const MlpProbe<S>& p) {
  return p.hidden.weight.numel() + p.hidden.bias.numel() + p.output.weight.numel() + p.output.bias.numel();
}

// Digest of all parameter bytes; used to assert freeze contracts.
template <typename S>
uint64_t param_hash(const EncoderModel<S>& m) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& b : m.blocks) {
    const auto& w = b.conv.weight.data;
    const auto& bi = b.conv.bias.data;
    h = fnv1a64(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(w.data()),
                                               w.size() * sizeof(S)),
                h);
    h = fnv1a64(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(bi.data()),
                                               bi.size() * sizeof(S)),
                h);
  }
  return h;
}

}  // namespace pfp::nn
