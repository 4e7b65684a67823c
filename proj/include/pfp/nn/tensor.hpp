// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string_view>
#include <vector>

#include "pfp/common/error.hpp"

namespace pfp::nn {

// Dense row-major tensor. Training runs in float; gradient checking in
// double. Anything producing NaN/Inf is a bug, surfaced via check_finite at
// the loss/optimizer boundaries.
template <typename S>
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<S> data;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(numel_of(shape)), S(0));
  }

  static int64_t numel_of(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t d : s) {
      if (d <= 0) fail("nn.bad_shape", "tensor dimensions must be positive, got {}", d);
      n *= d;
    }
    return n;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int64_t dim(size_t i) const { return shape.at(i); }

  S& operator[](size_t i) { return data[i]; }
  const S& operator[](size_t i) const { return data[i]; }

  // [B, C, T] indexing for the sequence tensors used throughout.
  S& at3(int64_t b, int64_t c, int64_t t) { return data[(b * shape[1] + c) * shape[2] + t]; }
  const S& at3(int64_t b, int64_t c, int64_t t) const { return data[(b * shape[1] + c) * shape[2] + t]; }

  S& at2(int64_t r, int64_t c) { return data[r * shape[1] + c]; }
  const S& at2(int64_t r, int64_t c) const { return data[r * shape[1] + c]; }

  void zero() { std::fill(data.begin(), data.end(), S(0)); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  template <typename T>
  Tensor<T> cast() const {
    Tensor<T> out(shape);
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<T>(data[i]);
    return out;
  }
};

template <typename S>
void check_finite(const Tensor<S>& t, std::string_view what) {
  for (S v : t.data)
    if (!std::isfinite(static_cast<double>(v))) fail("nn.non_finite", "non-finite value in {}", what);
}

template <typename S>
void require_same_shape(const Tensor<S>& a, const Tensor<S>& b, std::string_view what) {
  if (!a.same_shape(b)) {
    std::string sa, sb;
    for (int64_t d : a.shape) sa += std::to_string(d) + "x";
    for (int64_t d : b.shape) sb += std::to_string(d) + "x";
    fail("nn.shape_mismatch", "{}: shapes [{}] vs [{}]", what, sa, sb);
  }
}

}  // namespace pfp::nn
