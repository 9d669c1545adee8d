#pragma once

// Central finite-difference checks for every layer backward, in double.
// Shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "volc/models.hpp"
#include "volc/nn.hpp"
#include "volc/rng.hpp"

namespace gradcheck {

using volc::RngStream;
using volc::Shape;
using volc::Tensor64;
namespace nn = volc::nn;

struct Check {
  std::string layer;
  std::string shape;
  std::string wrt;
  double rel_error;
  std::size_t coords;
};

inline constexpr double kStep = 1e-6;
inline constexpr std::size_t kMaxCoords = 64;
inline constexpr double kZeroGradient = 1e-5;

inline Tensor64 random_tensor(Shape shape, RngStream& rng, double lo = -1.0, double hi = 1.0) {
  Tensor64 t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Values bounded away from zero so relu never changes state under a step.
inline Tensor64 away_from_zero(Shape shape, RngStream& rng) {
  Tensor64 t(std::move(shape));
  for (double& v : t.values()) {
    const double mag = rng.uniform(0.05, 1.0);
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

// Every 2x2 window of the last two axes holds distinct values at least
// 0.01 apart so the winner never flips under a step.
inline Tensor64 distinct_windows(Shape shape, RngStream& rng) {
  Tensor64 t(shape);
  const std::size_t h = shape[shape.size() - 2], w = shape.back();
  const std::size_t planes = t.size() / (h * w);
  for (std::size_t p = 0; p < planes; ++p) {
    double* plane = t.data() + p * h * w;
    for (std::size_t y = 0; y < h; y += 2) {
      for (std::size_t x = 0; x < w; x += 2) {
        std::vector<double> v{0.0, 0.25, 0.5, 0.75};
        for (std::size_t i = 3; i > 0; --i) std::swap(v[i], v[rng.below(i + 1)]);
        const double base = rng.uniform(-1.0, 0.2);
        plane[y * w + x] = base + v[0];
        plane[y * w + x + 1] = base + v[1];
        plane[(y + 1) * w + x] = base + v[2];
        plane[(y + 1) * w + x + 1] = base + v[3];
      }
    }
  }
  return t;
}

inline double dot(const Tensor64& a, const Tensor64& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Relative error ||a - n|| / max(||a||, ||n||, kZeroGradient) over up to
// kMaxCoords coordinates of `x`, where n is the central difference of
// `loss`. The floor matters only for gradients that are exactly zero (a conv
// bias feeding batchnorm), where the difference quotient is pure roundoff.
inline Check compare(const std::string& layer, const Shape& shape, const std::string& wrt, Tensor64& x,
                     const Tensor64& analytic, const std::function<double()>& loss, RngStream& rng) {
  std::vector<std::size_t> coords(x.size());
  for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  if (coords.size() > kMaxCoords) {
    for (std::size_t i = 0; i < kMaxCoords; ++i) std::swap(coords[i], coords[i + rng.below(coords.size() - i)]);
    coords.resize(kMaxCoords);
  }
  double diff = 0.0, na = 0.0, nn_ = 0.0;
  for (std::size_t i : coords) {
    const double saved = x[i];
    x[i] = saved + kStep;
    const double up = loss();
    x[i] = saved - kStep;
    const double down = loss();
    x[i] = saved;
    const double numeric = (up - down) / (2.0 * kStep);
    diff += (analytic[i] - numeric) * (analytic[i] - numeric);
    na += analytic[i] * analytic[i];
    nn_ += numeric * numeric;
  }
  const double denom = std::max({std::sqrt(na), std::sqrt(nn_), kZeroGradient});
  return {layer, volc::shape_to_string(shape), wrt, std::sqrt(diff) / denom, coords.size()};
}

// ------------------------------------------------------------------ layers

inline void check_conv(std::vector<Check>& out, RngStream rng, std::size_t n, std::size_t cin, std::size_t cout,
                       std::size_t k, std::size_t h, std::size_t w) {
  auto layer = nn::ConvLayer<double>::make(cin, cout, k, k);
  layer.weights = random_tensor(layer.weights.shape(), rng);
  layer.bias = random_tensor(layer.bias.shape(), rng);
  Tensor64 x = random_tensor({n, cin, h, w}, rng);
  const Tensor64 r = random_tensor({n, cout, h, w}, rng);
  const auto g = nn::conv2d_backward(layer, x, r);
  auto loss = [&] { return dot(nn::conv2d_forward(layer, x), r); };
  const Shape s{n, cin, h, w};
  const std::string name = "conv2d k" + std::to_string(k) + " " + std::to_string(cin) + "->" + std::to_string(cout);
  out.push_back(compare(name, s, "input", x, g.input, loss, rng));
  out.push_back(compare(name, s, "weights", layer.weights, g.weights, loss, rng));
  out.push_back(compare(name, s, "bias", layer.bias, g.bias, loss, rng));
}

inline void check_batchnorm(std::vector<Check>& out, RngStream rng, const Shape& s) {
  auto layer = nn::BatchNormLayer<double>::make(s[1]);
  layer.gamma = random_tensor(layer.gamma.shape(), rng, 0.5, 1.5);
  layer.beta = random_tensor(layer.beta.shape(), rng);
  Tensor64 x = random_tensor(s, rng, -2.0, 2.0);
  const Tensor64 r = random_tensor(s, rng);
  nn::BatchNormCache<double> cache;
  nn::batchnorm_forward(layer, x, nn::Mode::kTrain, &cache);
  const auto g = nn::batchnorm_backward(layer, cache, r);
  auto loss = [&] {
    auto copy = layer;
    return dot(nn::batchnorm_forward(copy, x, nn::Mode::kTrain), r);
  };
  out.push_back(compare("batchnorm", s, "input", x, g.input, loss, rng));
  out.push_back(compare("batchnorm", s, "gamma", layer.gamma, g.gamma, loss, rng));
  out.push_back(compare("batchnorm", s, "beta", layer.beta, g.beta, loss, rng));
}

// Batchnorm -> relu -> max-pool as one op, against its own forward.
inline void check_norm_relu_pool(std::vector<Check>& out, RngStream rng, const Shape& s) {
  auto layer = nn::BatchNormLayer<double>::make(s[1]);
  layer.gamma = random_tensor(layer.gamma.shape(), rng, 0.5, 1.5);
  layer.beta = random_tensor(layer.beta.shape(), rng, -0.3, 0.3);
  Tensor64 x = distinct_windows(s, rng);
  const Tensor64 r = random_tensor({s[0], s[1], s[2] / 2, s[3] / 2}, rng);
  auto forward = [&](nn::BatchNormLayer<double>& l, nn::NormPoolCache<double>& c) {
    return nn::norm_relu_pool_train(l, Tensor64(x), c);
  };
  nn::NormPoolCache<double> cache;
  auto fwd_layer = layer;
  forward(fwd_layer, cache);
  const auto g = nn::norm_relu_pool_backward(layer, std::move(cache), r);
  auto loss = [&] {
    auto copy = layer;
    nn::NormPoolCache<double> c;
    return dot(forward(copy, c), r);
  };
  out.push_back(compare("batchnorm+relu+maxpool", s, "input", x, g.input, loss, rng));
  out.push_back(compare("batchnorm+relu+maxpool", s, "gamma", layer.gamma, g.gamma, loss, rng));
  out.push_back(compare("batchnorm+relu+maxpool", s, "beta", layer.beta, g.beta, loss, rng));
}

inline void check_dense(std::vector<Check>& out, RngStream rng, std::size_t n, std::size_t in, std::size_t o) {
  auto layer = nn::DenseLayer<double>::make(in, o);
  layer.weights = random_tensor(layer.weights.shape(), rng);
  layer.bias = random_tensor(layer.bias.shape(), rng);
  Tensor64 x = random_tensor({n, in}, rng);
  const Tensor64 r = random_tensor({n, o}, rng);
  const auto g = nn::dense_backward(layer, x, r);
  auto loss = [&] { return dot(nn::dense_forward(layer, x), r); };
  const Shape s{n, in};
  out.push_back(compare("dense", s, "input", x, g.input, loss, rng));
  out.push_back(compare("dense", s, "weights", layer.weights, g.weights, loss, rng));
  out.push_back(compare("dense", s, "bias", layer.bias, g.bias, loss, rng));
}

inline void check_relu(std::vector<Check>& out, RngStream rng, const Shape& s) {
  Tensor64 x = away_from_zero(s, rng);
  const Tensor64 r = random_tensor(s, rng);
  const Tensor64 g = nn::relu_backward(x, r);
  out.push_back(compare("relu", s, "input", x, g, [&] { return dot(nn::relu(x), r); }, rng));
}

inline void check_maxpool(std::vector<Check>& out, RngStream rng, const Shape& s) {
  Tensor64 x = distinct_windows(s, rng);
  const Tensor64 r = random_tensor({s[0], s[1], s[2] / 2, s[3] / 2}, rng);
  nn::MaxPoolCache cache;
  nn::max_pool(x, &cache);
  const Tensor64 g = nn::max_pool_backward(cache, r);
  out.push_back(compare("maxpool", s, "input", x, g, [&] { return dot(nn::max_pool(x), r); }, rng));
}

inline void check_gap(std::vector<Check>& out, RngStream rng, const Shape& s) {
  Tensor64 x = random_tensor(s, rng);
  const Tensor64 r = random_tensor({s[0], s[1]}, rng);
  const Tensor64 g = nn::global_avg_pool_backward(s, r);
  out.push_back(compare("global_avg_pool", s, "input", x, g, [&] { return dot(nn::global_avg_pool(x), r); }, rng));
}

inline void check_sigmoid(std::vector<Check>& out, RngStream rng, const Shape& s) {
  Tensor64 x = random_tensor(s, rng, -4.0, 4.0);
  const Tensor64 r = random_tensor(s, rng);
  const Tensor64 g = nn::sigmoid_backward(nn::sigmoid(x), r);
  out.push_back(compare("sigmoid", s, "input", x, g, [&] { return dot(nn::sigmoid(x), r); }, rng));
}

inline void check_dropout(std::vector<Check>& out, RngStream rng, const Shape& s, double rate) {
  const nn::DropoutLayer layer{rate};
  const RngStream mask_rng = rng.fork("mask");
  Tensor64 x = random_tensor(s, rng);
  const Tensor64 r = random_tensor(s, rng);
  nn::DropoutMask mask;
  RngStream m = mask_rng;
  nn::dropout(layer, x, nn::Mode::kTrain, m, &mask);
  const Tensor64 g = nn::dropout_backward(mask, r);
  auto loss = [&] {
    RngStream same = mask_rng;  // replays the fixed mask
    return dot(nn::dropout(layer, x, nn::Mode::kTrain, same), r);
  };
  out.push_back(compare("dropout p" + std::to_string(rate).substr(0, 4), s, "input", x, g, loss, rng));
}

inline void check_bce(std::vector<Check>& out, RngStream rng, std::size_t n) {
  Tensor64 p = random_tensor({n, 1}, rng, 0.02, 0.98);
  Tensor64 y({n, 1});
  for (double& v : y.values()) v = static_cast<double>(rng.below(2));
  const auto res = nn::bce_loss(p, y);
  auto loss = [&] { return nn::bce_loss(p, y).loss; };
  out.push_back(compare("bce", {n, 1}, "predictions", p, res.grad, loss, rng));
}

// Whole network: conv blocks, GAP, dense, dropout, sigmoid and BCE chained
// through Network<double>.
inline void check_network(std::vector<Check>& out, RngStream rng, std::size_t n, std::size_t side) {
  using volc::LayerDesc;
  using volc::LayerKind;
  volc::ModelSpec spec;
  spec.name = "tiny";
  spec.input = {3, static_cast<std::uint32_t>(side), static_cast<std::uint32_t>(side)};
  spec.layers = {{LayerKind::kConv2d, 4, 3}, {LayerKind::kBatchNorm}, {LayerKind::kRelu}, {LayerKind::kMaxPool},
                 {LayerKind::kConv2d, 6, 3}, {LayerKind::kBatchNorm}, {LayerKind::kRelu}, {LayerKind::kMaxPool},
                 {LayerKind::kGlobalAvgPool}, {LayerKind::kDense, 5}, {LayerKind::kRelu},
                 {LayerKind::kDropout, 0, 0, 0.3f}, {LayerKind::kDense, 1}, {LayerKind::kSigmoid}};
  RngStream init = rng.fork("init");
  volc::Network<double> net(spec, volc::init_weights(spec, init));
  const Tensor64 x = random_tensor({n, 3, side, side}, rng, 0.0, 1.0);
  Tensor64 y({n, 1});
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<double>(i % 2);
  const RngStream drop = rng.fork("dropout");
  auto loss = [&] {
    RngStream d = drop;
    return nn::bce_loss(net.forward_train(x, d), y).loss;
  };
  {
    RngStream d = drop;
    const auto res = nn::bce_loss(net.forward_train(x, d), y);
    net.backward(res.grad);
  }
  const auto params = net.trainable();
  std::vector<Tensor64> grads;
  for (const auto& p : params) grads.push_back(*p.grad);
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.push_back(compare("network", {n, 3, side, side}, "param " + std::to_string(i), *params[i].value, grads[i],
                          loss, rng));
  }
}

// `shapes` random configurations per layer type, drawn from `seed`.
inline std::vector<Check> run_suite(std::size_t shapes, std::uint64_t seed) {
  std::vector<Check> out;
  const RngStream base(seed);
  for (std::size_t i = 0; i < shapes; ++i) {
    RngStream rng = base.fork("shape", i);
    auto pick = [&](std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(rng.below(hi - lo + 1)); };
    const std::size_t n = pick(1, 3);

    // Cycle the conv configurations through every kernel path: 3x3 with few
    // inputs, 3x3 with more, wide rows, 1x1 and 5x5, and >64 channels.
    const std::size_t kind = i % 6;
    if (kind == 0) check_conv(out, rng.fork("conv"), n, pick(1, 4), pick(1, 9), 3, pick(1, 7), pick(1, 7));
    if (kind == 1) check_conv(out, rng.fork("conv"), n, pick(5, 9), pick(2, 12), 3, pick(2, 6), pick(2, 6));
    if (kind == 2) check_conv(out, rng.fork("conv"), 1, pick(1, 4), pick(1, 10), 3, pick(2, 3), 16 * pick(1, 2) + pick(0, 1));
    if (kind == 3) check_conv(out, rng.fork("conv"), n, pick(1, 6), pick(1, 6), 1, pick(1, 5), pick(1, 5));
    if (kind == 4) check_conv(out, rng.fork("conv"), n, pick(1, 4), pick(1, 5), 5, pick(2, 6), pick(2, 6));
    if (kind == 5) check_conv(out, rng.fork("conv"), 1, pick(2, 3), pick(65, 70), 3, pick(2, 3), pick(2, 3));
    if (kind == 5) check_conv(out, rng.fork("conv_wide"), 1, pick(65, 68), pick(2, 3), 3, 2, pick(2, 3));

    const Shape act{pick(2, 4), pick(1, 4), 2 * pick(1, 4), 2 * pick(1, 4)};
    check_batchnorm(out, rng.fork("bn"), act);
    check_norm_relu_pool(out, rng.fork("bnp"), act);
    check_dense(out, rng.fork("dense"), n, pick(1, 12), pick(1, 12));
    check_relu(out, rng.fork("relu"), {n, pick(1, 4), pick(1, 5), pick(1, 5)});
    check_maxpool(out, rng.fork("pool"), {n, pick(1, 3), 2 * pick(1, 4), 2 * pick(1, 4)});
    check_gap(out, rng.fork("gap"), {n, pick(1, 5), pick(1, 6), pick(1, 6)});
    check_sigmoid(out, rng.fork("sigmoid"), {n, pick(1, 8)});
    check_dropout(out, rng.fork("dropout"), {n, pick(2, 16)}, 0.1 * static_cast<double>(pick(1, 7)));
    check_bce(out, rng.fork("bce"), pick(1, 16));
    if (i % 4 == 0) check_network(out, rng.fork("net"), pick(2, 3), 4 * pick(2, 3));
  }
  return out;
}

}  // namespace gradcheck
