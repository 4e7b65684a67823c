// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <map>
#include <string>

#include "pfp/nn/tensor.hpp"

namespace pfp::nn {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adaptive-moment optimizer with bias correction. One state per parameter
// tensor, keyed by name so checkpoint round trips can stay exact.
template <typename S>
class Adam {
 public:
  explicit Adam(AdamHyper hyper = {}) : hyper_(hyper) {}

  const AdamHyper& hyper() const { return hyper_; }

  void step(const std::string& name, Tensor<S>& param, const Tensor<S>& grad) {
    require_same_shape(param, grad, "adam step " + name);
    for (S g : grad.data)
      if (!std::isfinite(static_cast<double>(g))) fail("nn.non_finite_grad", "non-finite gradient in {}", name);

    State& st = states_[name];
    if (st.m.data.empty()) {
      st.m = Tensor<S>(param.shape);
      st.v = Tensor<S>(param.shape);
    }
    st.t += 1;
    const double b1 = hyper_.beta1, b2 = hyper_.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(st.t));
    for (size_t i = 0; i < param.data.size(); ++i) {
      double g = static_cast<double>(grad.data[i]);
      double m = b1 * static_cast<double>(st.m.data[i]) + (1.0 - b1) * g;
      double v = b2 * static_cast<double>(st.v.data[i]) + (1.0 - b2) * g * g;
      st.m.data[i] = static_cast<S>(m);
      st.v.data[i] = static_cast<S>(v);
      double update = hyper_.lr * (m / bc1) / (std::sqrt(v / bc2) + hyper_.eps);
      param.data[i] = static_cast<S>(static_cast<double>(param.data[i]) - update);
    }
  }

 private:
  struct State {
    Tensor<S> m, v;
    int64_t t = 0;
  };
  AdamHyper hyper_;
  std::map<std::string, State> states_;
};

}  // namespace pfp::nn
