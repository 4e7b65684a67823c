// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "pfp/common/error.hpp"
#include "pfp/common/fsio.hpp"
#include "pfp/nn/checkpoint.hpp"
#include "pfp/nn/gradcheck.hpp"
#include "pfp/nn/loss.hpp"
#include "pfp/nn/model.hpp"
#include "pfp/nn/optimizer.hpp"

using namespace pfp;
using namespace pfp::nn;

namespace {

std::string err_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

template <typename S>
Tensor<S> random_tensor(std::vector<int64_t> shape, Rng& rng, double scale = 1.0) {
  Tensor<S> t(std::move(shape));
  for (S& v : t.data) v = static_cast<S>(rng.uniform(-scale, scale));
  return t;
}

}  // namespace

TEST_CASE("conv1d: kernel-1 identity weights reproduce the input") {
  Conv1d<double> conv;
  conv.in_ch = 2;
  conv.out_ch = 2;
  conv.kernel = 1;
  conv.stride = 1;
  conv.weight = Tensor<double>({2, 2, 1});
  conv.bias = Tensor<double>({2});
  conv.weight.data = {1, 0, 0, 1};
  Rng rng(1);
  Tensor<double> x = random_tensor<double>({2, 2, 5}, rng);
  Tensor<double> y = conv1d_forward(conv, x);
  CHECK(y.shape == x.shape);
  for (size_t i = 0; i < x.data.size(); ++i) CHECK(y.data[i] == doctest::Approx(x.data[i]));
}

TEST_CASE("conv1d: all-ones kernel over all-ones input is the kernel size") {
  Conv1d<double> conv;
  conv.in_ch = 1;
  conv.out_ch = 1;
  conv.kernel = 3;
  conv.stride = 1;
  conv.weight = Tensor<double>({1, 1, 3});
  conv.bias = Tensor<double>({1});
  std::fill(conv.weight.data.begin(), conv.weight.data.end(), 1.0);
  Tensor<double> x({1, 1, 3});
  std::fill(x.data.begin(), x.data.end(), 1.0);
  Tensor<double> y = conv1d_forward(conv, x);
  REQUIRE(y.data.size() == 1);
  CHECK(y.data[0] == doctest::Approx(3.0));
}

TEST_CASE("conv1d: output length and shape errors") {
  CHECK(conv1d_out_len(1000, 8, 1) == 993);
  CHECK(conv1d_out_len(10, 4, 2) == 4);
  Rng rng(2);
  Conv1d<double> conv = make_conv1d<double>(3, 4, 5, 1, rng);
  Tensor<double> wrong_ch = random_tensor<double>({1, 2, 8}, rng);
  CHECK(err_code([&] { conv1d_forward(conv, wrong_ch); }) == "nn.shape_mismatch");
  Tensor<double> too_short = random_tensor<double>({1, 3, 4}, rng);
  CHECK(err_code([&] { conv1d_forward(conv, too_short); }) == "nn.shape_mismatch");
}

TEST_CASE("conv1d backward matches central finite differences") {
  Rng rng(7);
  Conv1d<double> conv = make_conv1d<double>(2, 3, 4, 2, rng);
  Tensor<double> x = random_tensor<double>({2, 2, 11}, rng);

  // Loss: sum of squares of outputs (smooth, no relu kinks involved).
  auto loss_fn = [&] {
    Tensor<double> y = conv1d_forward(conv, x);
    double s = 0;
    for (double v : y.data) s += v * v;
    return 0.5 * s;
  };
  Conv1d<double> grads = conv;
  grads.weight.zero();
  grads.bias.zero();
  Tensor<double> y = conv1d_forward(conv, x);
  conv1d_backward(conv, x, y, grads);

  std::vector<NamedParam<double>> params{{"w", &conv.weight}, {"b", &conv.bias}};
  std::vector<const Tensor<double>*> analytic{&grads.weight, &grads.bias};
  GradCheckResult res = grad_check(params, analytic, loss_fn, 1e-5, 200, 3);
  CHECK(res.max_rel_err < 1e-6);

  // Input gradient as well, via a parameter view over x.
  Conv1d<double> g2 = conv;
  g2.weight.zero();
  g2.bias.zero();
  y = conv1d_forward(conv, x);
  Tensor<double> dx = conv1d_backward(conv, x, y, g2);
  std::vector<NamedParam<double>> xparam{{"x", &x}};
  std::vector<const Tensor<double>*> xgrad{&dx};
  res = grad_check(xparam, xgrad, loss_fn, 1e-5, 40, 4);
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("global_avg_pool: constants and hand case") {
  Tensor<double> x({1, 2, 3});
  x.data = {4, 4, 4, 1, 3, 2};
  Tensor<double> y = global_avg_pool_forward(x);
  CHECK(y.data[0] == doctest::Approx(4.0));
  CHECK(y.data[1] == doctest::Approx(2.0));
}

TEST_CASE("pooling backward matches finite differences") {
  Rng rng(11);
  Tensor<double> x = random_tensor<double>({2, 3, 12}, rng);

  SUBCASE("global average") {
    auto loss_fn = [&] {
      Tensor<double> y = global_avg_pool_forward(x);
      double s = 0;
      for (double v : y.data) s += v * v;
      return 0.5 * s;
    };
    Tensor<double> y = global_avg_pool_forward(x);
    Tensor<double> dx = global_avg_pool_backward(x.shape, y);
    std::vector<NamedParam<double>> params{{"x", &x}};
    std::vector<const Tensor<double>*> analytic{&dx};
    CHECK(grad_check(params, analytic, loss_fn, 1e-5, 72, 5).max_rel_err < 1e-6);
  }

  SUBCASE("max pool factor 4") {
    auto loss_fn = [&] {
      Tensor<double> y = maxpool1d_forward<double>(x, 4, nullptr);
      double s = 0;
      for (double v : y.data) s += v * v;
      return 0.5 * s;
    };
    std::vector<int32_t> argmax;
    Tensor<double> y = maxpool1d_forward(x, 4, &argmax);
    Tensor<double> dx = maxpool1d_backward(x.shape, 4, argmax, y);
    std::vector<NamedParam<double>> params{{"x", &x}};
    std::vector<const Tensor<double>*> analytic{&dx};
    CHECK(grad_check(params, analytic, loss_fn, 1e-6, 72, 6).max_rel_err < 1e-5);
  }
}

TEST_CASE("softmax cross entropy: uniform and saturated cases") {
  Tensor<double> logits({1, 16});
  std::vector<int32_t> labels{3};
  auto res = softmax_cross_entropy(logits, labels);
  CHECK(res.loss == doctest::Approx(std::log(16.0)).epsilon(1e-9));

  Tensor<double> hot({1, 4});
  hot.data = {0, 1e4, 0, 0};
  std::vector<int32_t> hot_label{1};
  CHECK(softmax_cross_entropy(hot, hot_label).loss == doctest::Approx(0.0).epsilon(1e-9));

  std::vector<int32_t> bad{16};
  CHECK(err_code([&] { softmax_cross_entropy(logits, bad); }) == "nn.bad_label");
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(13);
  Tensor<double> logits = random_tensor<double>({8, 7}, rng, 20.0);
  Tensor<double> p = softmax(logits);
  for (int64_t b = 0; b < 8; ++b) {
    double s = 0;
    for (int64_t k = 0; k < 7; ++k) s += p.at2(b, k);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("softmax cross entropy gradient matches finite differences") {
  Rng rng(17);
  Tensor<double> logits = random_tensor<double>({4, 5}, rng, 2.0);
  std::vector<int32_t> labels{0, 3, 2, 4};
  auto loss_fn = [&] { return softmax_cross_entropy(logits, labels).loss; };
  auto res = softmax_cross_entropy(logits, labels);
  std::vector<NamedParam<double>> params{{"logits", &logits}};
  std::vector<const Tensor<double>*> analytic{&res.grad_logits};
  CHECK(grad_check(params, analytic, loss_fn, 1e-5, 20, 7).max_rel_err < 1e-6);
}

TEST_CASE("adam: zero gradients and zero lr leave parameters unchanged") {
  Tensor<float> param({3});
  param.data = {1.0f, -2.0f, 3.0f};
  Tensor<float> zeros({3});
  Adam<float> adam({0.1, 0.9, 0.999, 1e-8});
  adam.step("p", param, zeros);
  CHECK(param.data == std::vector<float>{1.0f, -2.0f, 3.0f});

  Tensor<float> grad({3});
  grad.data = {1.0f, 1.0f, 1.0f};
  Adam<float> frozen({0.0, 0.9, 0.999, 1e-8});
  frozen.step("p", param, grad);
  CHECK(param.data == std::vector<float>{1.0f, -2.0f, 3.0f});
}

TEST_CASE("adam: two steps with constant gradient match a scalar recomputation") {
  // Independent scalar implementation of the update rule.
  double m = 0, v = 0, theta = 1.0;
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8, g = 1.0;
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    double mhat = m / (1 - std::pow(b1, t));
    double vhat = v / (1 - std::pow(b2, t));
    theta -= lr * mhat / (std::sqrt(vhat) + eps);
  }

  Tensor<double> param({1});
  param.data = {1.0};
  Tensor<double> grad({1});
  grad.data = {1.0};
  Adam<double> adam({lr, b1, b2, eps});
  adam.step("p", param, grad);
  adam.step("p", param, grad);
  CHECK(param.data[0] == doctest::Approx(theta).epsilon(1e-12));
  // Both steps move by roughly lr while the gradient direction is constant.
  CHECK(param.data[0] == doctest::Approx(0.8).epsilon(1e-6));
}

TEST_CASE("adam: non-finite gradients are a hard error") {
  Tensor<float> param({1});
  Tensor<float> grad({1});
  grad.data = {std::numeric_limits<float>::quiet_NaN()};
  Adam<float> adam;
  CHECK(err_code([&] { adam.step("p", param, grad); }) == "nn.non_finite_grad");
}

TEST_CASE("grad_check: linear model is exact, eps=0 invalid") {
  Rng rng(23);
  Linear<double> lin = make_linear<double>(6, 3, rng);
  Tensor<double> x = random_tensor<double>({4, 6}, rng);
  std::vector<int32_t> labels{0, 1, 2, 1};

  auto loss_fn = [&] {
    Tensor<double> logits = linear_forward(lin, x);
    return softmax_cross_entropy(logits, labels).loss;
  };
  Linear<double> grads = zeros_like(lin);
  Tensor<double> logits = linear_forward(lin, x);
  auto res = softmax_cross_entropy(logits, labels);
  linear_backward(lin, x, res.grad_logits, grads);

  std::vector<NamedParam<double>> params;
  collect_params(lin, "lin", params);
  std::vector<const Tensor<double>*> analytic{&grads.weight, &grads.bias};
  CHECK(grad_check(params, analytic, loss_fn, 1e-5, 21, 8).max_rel_err < 1e-8);
  CHECK(err_code([&] { grad_check(params, analytic, loss_fn, 0.0); }) == "nn.gradcheck_eps");
}

TEST_CASE("full small encoder + head passes grad check in double") {
  Rng rng(29);
  EncoderConfig cfg;
  cfg.channels = {6, 8};
  cfg.kernel = 4;
  cfg.pool_factor = 2;
  EncoderModel<double> enc = make_encoder<double>(cfg, rng);
  Linear<double> head = make_linear<double>(enc.embed_dim(), 3, rng);
  Tensor<double> x = random_tensor<double>({3, 2, 40}, rng);
  std::vector<int32_t> labels{0, 2, 1};

  auto loss_fn = [&] {
    Tensor<double> z = encoder_forward(enc, x);
    Tensor<double> logits = linear_forward(head, z);
    return softmax_cross_entropy(logits, labels).loss;
  };

  EncoderCache<double> cache;
  Tensor<double> z = encoder_forward(enc, x, &cache);
  Tensor<double> logits = linear_forward(head, z);
  auto res = softmax_cross_entropy(logits, labels);
  Linear<double> head_grads = zeros_like(head);
  Tensor<double> dz = linear_backward(head, z, res.grad_logits, head_grads);
  EncoderModel<double> enc_grads = zeros_like(enc);
  encoder_backward(enc, cache, dz, enc_grads);

  std::vector<NamedParam<double>> params;
  collect_params(enc, "enc", params);
  collect_params(head, "head", params);
  std::vector<NamedParam<double>> grad_refs;
  collect_params(enc_grads, "enc", grad_refs);
  collect_params(head_grads, "head", grad_refs);
  std::vector<const Tensor<double>*> analytic;
  for (const auto& g : grad_refs) analytic.push_back(g.tensor);

  GradCheckResult res2 = grad_check(params, analytic, loss_fn, 1e-5, 220, 9);
  CHECK(res2.params_checked >= 220);
  CHECK(res2.max_rel_err < 1e-6);
}

TEST_CASE("forward determinism: identical weights and inputs give identical bits") {
  Rng rng_a(31), rng_b(31);
  EncoderConfig cfg;
  cfg.channels = {8, 8};
  EncoderModel<float> a = make_encoder<float>(cfg, rng_a);
  EncoderModel<float> b = make_encoder<float>(cfg, rng_b);
  Rng xr(5);
  Tensor<float> x = random_tensor<float>({4, 2, 100}, xr);
  Tensor<float> za = encoder_forward(a, x);
  Tensor<float> zb = encoder_forward(b, x);
  CHECK(za.data == zb.data);
  CHECK(param_hash(a) == param_hash(b));
}

TEST_CASE("checkpoint: round trip is bit-identical, errors are distinct") {
  Checkpoint ckpt;
  CheckpointEntry e;
  e.name = "enc.block0.weight";
  e.shape = {2, 3};
  e.data = {0.25f, -1.5f, 3.0f, 0.1f, -0.0f, 42.0f};
  ckpt.entries.push_back(e);
  ckpt.metadata = {{"format_version", 1}, {"label_space_hash", "abc123"}};

  const auto dir = std::filesystem::temp_directory_path();
  const auto path = dir / "pfp_test.pfpr";
  save_checkpoint(ckpt, path);
  Checkpoint back = load_checkpoint(path);
  REQUIRE(back.entries.size() == 1);
  CHECK(back.entries[0].name == e.name);
  CHECK(back.entries[0].shape == e.shape);
  CHECK(std::memcmp(back.entries[0].data.data(), e.data.data(), e.data.size() * 4) == 0);
  CHECK(back.metadata["label_space_hash"] == "abc123");

  std::string bytes = read_file(path);
  const auto magic = dir / "pfp_test_magic.pfpr";
  atomic_write_file(magic, "XXXX" + bytes.substr(4));
  CHECK(err_code([&] { load_checkpoint(magic); }) == "checkpoint.bad_magic");

  const auto version = dir / "pfp_test_ver.pfpr";
  std::string vbytes = bytes;
  vbytes[4] = 9;
  atomic_write_file(version, vbytes);
  CHECK(err_code([&] { load_checkpoint(version); }) == "checkpoint.bad_version");

  const auto trunc = dir / "pfp_test_trunc.pfpr";
  atomic_write_file(trunc, bytes.substr(0, bytes.size() - 5));
  CHECK(err_code([&] { load_checkpoint(trunc); }) == "checkpoint.truncated");

  for (const auto& p : {path, magic, version, trunc}) std::filesystem::remove(p);
}

TEST_CASE("tensor finiteness check") {
  Tensor<float> t({2});
  t.data = {1.0f, std::numeric_limits<float>::infinity()};
  CHECK(err_code([&] { check_finite(t, "test"); }) == "nn.non_finite");
}
