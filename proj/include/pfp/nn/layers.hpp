// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include "pfp/common/rng.hpp"
#include "pfp/nn/tensor.hpp"

namespace pfp::nn {

template <typename S>
using MatrixRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MapRM = Eigen::Map<MatrixRM<S>>;
template <typename S>
using ConstMapRM = Eigen::Map<const MatrixRM<S>>;

// ---------------------------------------------------------------------------
// 1D convolution (valid padding), weight layout [out_ch, in_ch, kernel].
// ---------------------------------------------------------------------------

template <typename S>
struct Conv1d {
  int64_t in_ch = 0, out_ch = 0, kernel = 1, stride = 1;
  Tensor<S> weight;
  Tensor<S> bias;
};

inline int64_t conv1d_out_len(int64_t t, int64_t kernel, int64_t stride) {
  return (t - kernel) / stride + 1;
}

// Fan-in scaled uniform init, zero bias.
template <typename S>
Conv1d<S> make_conv1d(int64_t in_ch, int64_t out_ch, int64_t kernel, int64_t stride, Rng& rng) {
  Conv1d<S> c;
  c.in_ch = in_ch;
  c.out_ch = out_ch;
  c.kernel = kernel;
  c.stride = stride;
  c.weight = Tensor<S>({out_ch, in_ch, kernel});
  c.bias = Tensor<S>({out_ch});
  double bound = 1.0 / std::sqrt(static_cast<double>(in_ch * kernel));
  for (S& v : c.weight.data) v = static_cast<S>(rng.uniform(-bound, bound));
  return c;
}

namespace detail {

// col has shape [in_ch * kernel, B * T'] (row-major); column j = (b, t).
template <typename S>
void im2col(const Tensor<S>& x, int64_t kernel, int64_t stride, int64_t t_out, Tensor<S>& col) {
  const int64_t B = x.shape[0], C = x.shape[1];
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t k = 0; k < kernel; ++k) {
      S* dst = &col.data[(c * kernel + k) * (B * t_out)];
      for (int64_t b = 0; b < B; ++b) {
        const S* src = &x.data[(b * C + c) * x.shape[2]] + k;
        if (stride == 1) {
          std::copy(src, src + t_out, dst + b * t_out);
        } else {
          for (int64_t t = 0; t < t_out; ++t) dst[b * t_out + t] = src[t * stride];
        }
      }
    }
  }
}

template <typename S>
void col2im_add(const Tensor<S>& col, int64_t kernel, int64_t stride, int64_t t_out, Tensor<S>& dx) {
  const int64_t B = dx.shape[0], C = dx.shape[1];
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t k = 0; k < kernel; ++k) {
      const S* src = &col.data[(c * kernel + k) * (B * t_out)];
      for (int64_t b = 0; b < B; ++b) {
        S* dst = &dx.data[(b * C + c) * dx.shape[2]] + k;
        for (int64_t t = 0; t < t_out; ++t) dst[t * stride] += src[b * t_out + t];
      }
    }
  }
}

}  // namespace detail

// x: [B, C, T] -> [B, out_ch, T'] with T' = (T - kernel)/stride + 1.
template <typename S>
Tensor<S> conv1d_forward(const Conv1d<S>& layer, const Tensor<S>& x) {
  if (x.shape.size() != 3 || x.shape[1] != layer.in_ch)
    fail("nn.shape_mismatch", "conv1d: input channels {} but layer expects {}",
         x.shape.size() == 3 ? x.shape[1] : -1, layer.in_ch);
  const int64_t B = x.shape[0], T = x.shape[2];
  if (T < layer.kernel)
    fail("nn.shape_mismatch", "conv1d: sequence length {} shorter than kernel {}", T, layer.kernel);
  const int64_t t_out = conv1d_out_len(T, layer.kernel, layer.stride);

  Tensor<S> col({layer.in_ch * layer.kernel, B * t_out});
  detail::im2col(x, layer.kernel, layer.stride, t_out, col);

  Tensor<S> y({B, layer.out_ch, t_out});
  ConstMapRM<S> w(layer.weight.data.data(), layer.out_ch, layer.in_ch * layer.kernel);
  ConstMapRM<S> cm(col.data.data(), layer.in_ch * layer.kernel, B * t_out);
  MatrixRM<S> ym(layer.out_ch, B * t_out);
  ym.noalias() = w * cm;
  for (int64_t b = 0; b < B; ++b)
    for (int64_t o = 0; o < layer.out_ch; ++o) {
      const S bias = layer.bias.data[o];
      const S* src = ym.data() + o * (B * t_out) + b * t_out;
      S* dst = &y.data[(b * layer.out_ch + o) * t_out];
      for (int64_t t = 0; t < t_out; ++t) dst[t] = src[t] + bias;
    }
  return y;
}

// Accumulates parameter gradients into `grads` (same shapes as the layer) and
// returns the input gradient.
template <typename S>
Tensor<S> conv1d_backward(const Conv1d<S>& layer, const Tensor<S>& x, const Tensor<S>& grad_out,
                          Conv1d<S>& grads) {
  const int64_t B = x.shape[0], T = x.shape[2];
  const int64_t t_out = conv1d_out_len(T, layer.kernel, layer.stride);
  if (grad_out.shape != std::vector<int64_t>{B, layer.out_ch, t_out})
    fail("nn.shape_mismatch", "conv1d backward: grad shape does not match forward output");

  Tensor<S> col({layer.in_ch * layer.kernel, B * t_out});
  detail::im2col(x, layer.kernel, layer.stride, t_out, col);

  // Regroup grad_out to [out_ch, B*T'] to match the forward GEMM layout.
  MatrixRM<S> gy(layer.out_ch, B * t_out);
  for (int64_t b = 0; b < B; ++b)
    for (int64_t o = 0; o < layer.out_ch; ++o) {
      const S* src = &grad_out.data[(b * layer.out_ch + o) * t_out];
      std::copy(src, src + t_out, gy.data() + o * (B * t_out) + b * t_out);
    }

  ConstMapRM<S> cm(col.data.data(), layer.in_ch * layer.kernel, B * t_out);
  MapRM<S> gw(grads.weight.data.data(), layer.out_ch, layer.in_ch * layer.kernel);
  gw.noalias() += gy * cm.transpose();
  for (int64_t o = 0; o < layer.out_ch; ++o) grads.bias.data[o] += gy.row(o).sum();

  ConstMapRM<S> w(layer.weight.data.data(), layer.out_ch, layer.in_ch * layer.kernel);
  Tensor<S> dcol({layer.in_ch * layer.kernel, B * t_out});
  MapRM<S> dcm(dcol.data.data(), layer.in_ch * layer.kernel, B * t_out);
  dcm.noalias() = w.transpose() * gy;

  Tensor<S> dx(x.shape);
  detail::col2im_add(dcol, layer.kernel, layer.stride, t_out, dx);
  return dx;
}

// ---------------------------------------------------------------------------
// Activations and pooling
// ---------------------------------------------------------------------------

template <typename S>
void relu_inplace(Tensor<S>& x) {
  for (S& v : x.data) v = v > S(0) ? v : S(0);
}

// dy is masked by the forward *output* (y > 0).
template <typename S>
void relu_backward_inplace(const Tensor<S>& y, Tensor<S>& dy) {
  for (size_t i = 0; i < y.data.size(); ++i)
    if (!(y.data[i] > S(0))) dy.data[i] = S(0);
}

// Non-overlapping max pooling over the time axis; trailing remainder dropped.
template <typename S>
Tensor<S> maxpool1d_forward(const Tensor<S>& x, int64_t factor, std::vector<int32_t>* argmax) {
  if (factor < 1) fail("nn.bad_pool", "pool factor must be >= 1, got {}", factor);
  const int64_t B = x.shape[0], C = x.shape[1], T = x.shape[2];
  const int64_t t_out = T / factor;
  if (t_out == 0) fail("nn.shape_mismatch", "maxpool: sequence length {} shorter than factor {}", T, factor);
  Tensor<S> y({B, C, t_out});
  if (argmax) argmax->resize(static_cast<size_t>(B * C * t_out));
  for (int64_t bc = 0; bc < B * C; ++bc) {
    const S* src = &x.data[bc * T];
    S* dst = &y.data[bc * t_out];
    for (int64_t t = 0; t < t_out; ++t) {
      int64_t best = t * factor;
      for (int64_t k = 1; k < factor; ++k)
        if (src[t * factor + k] > src[best]) best = t * factor + k;
      dst[t] = src[best];
      if (argmax) (*argmax)[bc * t_out + t] = static_cast<int32_t>(best);
    }
  }
  return y;
}

template <typename S>
Tensor<S> maxpool1d_backward(const std::vector<int64_t>& in_shape, int64_t factor,
                             const std::vector<int32_t>& argmax, const Tensor<S>& dy) {
  Tensor<S> dx(in_shape);
  const int64_t T = in_shape[2];
  const int64_t t_out = T / factor;
  for (int64_t bc = 0; bc < in_shape[0] * in_shape[1]; ++bc)
    for (int64_t t = 0; t < t_out; ++t)
      dx.data[bc * T + argmax[bc * t_out + t]] += dy.data[bc * t_out + t];
  return dx;
}

// Mean over the time axis: [B, C, T] -> [B, C].
template <typename S>
Tensor<S> global_avg_pool_forward(const Tensor<S>& x) {
  if (x.shape.size() != 3) fail("nn.shape_mismatch", "global_avg_pool expects [B,C,T]");
  const int64_t B = x.shape[0], C = x.shape[1], T = x.shape[2];
  if (T == 0) fail("nn.shape_mismatch", "global_avg_pool: empty time axis");
  Tensor<S> y({B, C});
  for (int64_t bc = 0; bc < B * C; ++bc) {
    S acc = S(0);
    const S* src = &x.data[bc * T];
    for (int64_t t = 0; t < T; ++t) acc += src[t];
    y.data[bc] = acc / static_cast<S>(T);
  }
  return y;
}

template <typename S>
Tensor<S> global_avg_pool_backward(const std::vector<int64_t>& in_shape, const Tensor<S>& dy) {
  Tensor<S> dx(in_shape);
  const int64_t T = in_shape[2];
  for (int64_t bc = 0; bc < in_shape[0] * in_shape[1]; ++bc) {
    const S g = dy.data[bc] / static_cast<S>(T);
    for (int64_t t = 0; t < T; ++t) dx.data[bc * T + t] = g;
  }
  return dx;
}

// Max over the time axis, with argmax for backward.
template <typename S>
Tensor<S> global_max_pool_forward(const Tensor<S>& x, std::vector<int32_t>* argmax) {
  const int64_t B = x.shape[0], C = x.shape[1], T = x.shape[2];
  Tensor<S> y({B, C});
  if (argmax) argmax->resize(static_cast<size_t>(B * C));
  for (int64_t bc = 0; bc < B * C; ++bc) {
    const S* src = &x.data[bc * T];
    int64_t best = 0;
    for (int64_t t = 1; t < T; ++t)
      if (src[t] > src[best]) best = t;
    y.data[bc] = src[best];
    if (argmax) (*argmax)[bc] = static_cast<int32_t>(best);
  }
  return y;
}

template <typename S>
Tensor<S> global_max_pool_backward(const std::vector<int64_t>& in_shape, const std::vector<int32_t>& argmax,
                                   const Tensor<S>& dy) {
  Tensor<S> dx(in_shape);
  const int64_t T = in_shape[2];
  for (int64_t bc = 0; bc < in_shape[0] * in_shape[1]; ++bc) dx.data[bc * T + argmax[bc]] += dy.data[bc];
  return dx;
}

// ---------------------------------------------------------------------------
// Fully connected layer, weight layout [out, in].
// ---------------------------------------------------------------------------

template <typename S>
struct Linear {
  int64_t in_dim = 0, out_dim = 0;
  Tensor<S> weight;
  Tensor<S> bias;
};

template <typename S>
Linear<S> make_linear(int64_t in_dim, int64_t out_dim, Rng& rng) {
  Linear<S> l;
  l.in_dim = in_dim;
  l.out_dim = out_dim;
  l.weight = Tensor<S>({out_dim, in_dim});
  l.bias = Tensor<S>({out_dim});
  double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  for (S& v : l.weight.data) v = static_cast<S>(rng.uniform(-bound, bound));
  return l;
}

// x: [B, in] -> [B, out]
template <typename S>
Tensor<S> linear_forward(const Linear<S>& layer, const Tensor<S>& x) {
  if (x.shape.size() != 2 || x.shape[1] != layer.in_dim)
    fail("nn.shape_mismatch", "linear: input dim {} but layer expects {}",
         x.shape.size() == 2 ? x.shape[1] : -1, layer.in_dim);
  const int64_t B = x.shape[0];
  Tensor<S> y({B, layer.out_dim});
  ConstMapRM<S> xm(x.data.data(), B, layer.in_dim);
  ConstMapRM<S> wm(layer.weight.data.data(), layer.out_dim, layer.in_dim);
  MapRM<S> ym(y.data.data(), B, layer.out_dim);
  ym.noalias() = xm * wm.transpose();
  for (int64_t b = 0; b < B; ++b)
    for (int64_t o = 0; o < layer.out_dim; ++o) y.data[b * layer.out_dim + o] += layer.bias.data[o];
  return y;
}

template <typename S>
Tensor<S> linear_backward(const Linear<S>& layer, const Tensor<S>& x, const Tensor<S>& grad_out,
                          Linear<S>& grads) {
  const int64_t B = x.shape[0];
  ConstMapRM<S> xm(x.data.data(), B, layer.in_dim);
  ConstMapRM<S> gym(grad_out.data.data(), B, layer.out_dim);
  MapRM<S> gw(grads.weight.data.data(), layer.out_dim, layer.in_dim);
  gw.noalias() += gym.transpose() * xm;
  for (int64_t b = 0; b < B; ++b)
    for (int64_t o = 0; o < layer.out_dim; ++o) grads.bias.data[o] += grad_out.data[b * layer.out_dim + o];

  Tensor<S> dx({B, layer.in_dim});
  ConstMapRM<S> wm(layer.weight.data.data(), layer.out_dim, layer.in_dim);
  MapRM<S> dxm(dx.data.data(), B, layer.in_dim);
  dxm.noalias() = gym * wm;
  return dx;
}

}  // namespace pfp::nn
