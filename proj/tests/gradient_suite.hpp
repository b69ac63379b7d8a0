#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "roitrack/grad_check.hpp"
#include "roitrack/nn.hpp"
#include "roitrack/rng.hpp"
#include "test_util.hpp"

// Finite-difference cases for every differentiable layer. Each case draws a
// fresh random geometry and input of magnitude <= 1 from its trial index.
namespace roitrack::test {

struct LayerCase {
  std::string name;
  nn::DifferentiableOp op;
  std::vector<Tensor> inputs;
};

using CaseFactory = std::function<LayerCase(Rng&)>;

// Magnitudes in [0.1, 1] with random sign: keeps ReLU kinks out of the
// eps-neighbourhood.
inline Tensor away_from_zero(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 1.0);
  return t;
}

inline LayerCase conv_case(Rng& rng) {
  const std::size_t c = 1 + rng.below(3), k = 1 + rng.below(3);
  const std::size_t h = 4 + rng.below(5), w = 4 + rng.below(5);
  const int stride = 1 + static_cast<int>(rng.below(2));
  const int pad = static_cast<int>(rng.below(2));
  LayerCase lc;
  lc.name = "conv2d";
  lc.op.forward = [stride, pad](std::span<const Tensor> in) {
    return nn::conv2d_forward(in[0], in[1], in[2], stride, pad);
  };
  lc.op.backward = [stride, pad](std::span<const Tensor> in, const Tensor& up) {
    nn::ConvGrads g = nn::conv2d_backward(in[0], in[1], up, stride, pad);
    return std::vector<Tensor>{g.input, g.kernels, g.bias};
  };
  lc.inputs = {random_tensor({c, h, w}, rng), random_tensor({k, c, 3, 3}, rng), random_tensor({k}, rng)};
  return lc;
}

inline LayerCase avg_pool_case(Rng& rng) {
  const int kernel = 1 + static_cast<int>(rng.below(4));
  const int stride = 1 + static_cast<int>(rng.below(4));
  const std::size_t h = static_cast<std::size_t>(kernel) + rng.below(6);
  const std::size_t w = static_cast<std::size_t>(kernel) + rng.below(6);
  LayerCase lc;
  lc.name = "avg_pool";
  lc.op.forward = [kernel, stride](std::span<const Tensor> in) { return nn::avg_pool(in[0], kernel, stride); };
  lc.op.backward = [kernel, stride](std::span<const Tensor> in, const Tensor& up) {
    return std::vector<Tensor>{nn::avg_pool_backward(in[0].shape(), up, kernel, stride)};
  };
  lc.inputs = {random_tensor({h, w}, rng)};
  return lc;
}

inline LayerCase sigmoid_case(Rng& rng) {
  LayerCase lc;
  lc.name = "sigmoid";
  lc.op.forward = [](std::span<const Tensor> in) { return nn::sigmoid(in[0]); };
  lc.op.backward = [](std::span<const Tensor> in, const Tensor& up) {
    return std::vector<Tensor>{nn::sigmoid_backward(nn::sigmoid(in[0]), up)};
  };
  lc.inputs = {random_tensor({2 + rng.below(3), 3 + rng.below(4)}, rng)};
  return lc;
}

inline LayerCase relu_case(Rng& rng) {
  LayerCase lc;
  lc.name = "relu";
  lc.op.forward = [](std::span<const Tensor> in) { return nn::relu(in[0]); };
  lc.op.backward = [](std::span<const Tensor> in, const Tensor& up) {
    return std::vector<Tensor>{nn::relu_backward(in[0], up)};
  };
  lc.inputs = {away_from_zero({3, 2 + rng.below(4), 2 + rng.below(4)}, rng)};
  return lc;
}

inline LayerCase resize_case(Rng& rng) {
  const std::size_t oh = 2 + rng.below(9), ow = 2 + rng.below(9);
  LayerCase lc;
  lc.name = "resize_bilinear";
  lc.op.forward = [oh, ow](std::span<const Tensor> in) { return nn::resize_bilinear(in[0], oh, ow); };
  lc.op.backward = [](std::span<const Tensor> in, const Tensor& up) {
    return std::vector<Tensor>{nn::resize_bilinear_backward(in[0].shape(), up)};
  };
  lc.inputs = {random_tensor({1 + rng.below(3), 2 + rng.below(6), 2 + rng.below(6)}, rng)};
  return lc;
}

inline LayerCase concat_case(Rng& rng) {
  const std::size_t ca = 1 + rng.below(3), cb = 1 + rng.below(3), h = 2 + rng.below(4), w = 2 + rng.below(4);
  LayerCase lc;
  lc.name = "concat_channels";
  lc.op.forward = [](std::span<const Tensor> in) { return nn::concat_channels(in[0], in[1]); };
  lc.op.backward = [ca](std::span<const Tensor>, const Tensor& up) {
    auto [a, b] = nn::split_channels(up, ca);
    return std::vector<Tensor>{a, b};
  };
  lc.inputs = {random_tensor({ca, h, w}, rng), random_tensor({cb, h, w}, rng)};
  return lc;
}

inline LayerCase mse_case(Rng& rng) {
  LayerCase lc;
  lc.name = "mse_loss";
  lc.op.forward = [](std::span<const Tensor> in) { return Tensor({1}, {nn::mse_loss(in[0], in[1]).loss}); };
  lc.op.backward = [](std::span<const Tensor> in, const Tensor& up) {
    Tensor g = nn::mse_loss(in[0], in[1]).grad;
    for (double& v : g.data()) v *= up[0];
    Tensor gt = g;
    for (double& v : gt.data()) v = -v;
    return std::vector<Tensor>{g, gt};
  };
  const Shape s{1 + rng.below(3), 2 + rng.below(5)};
  lc.inputs = {random_tensor(s, rng), random_tensor(s, rng)};
  return lc;
}

// conv -> relu -> conv -> sigmoid, the shape of every branch-plus-head path.
inline LayerCase chain_case(Rng& rng) {
  LayerCase lc;
  lc.name = "conv_relu_conv_sigmoid";
  lc.op.forward = [](std::span<const Tensor> in) {
    const Tensor h = nn::relu(nn::conv2d_forward(in[0], in[1], in[2], 2, 1));
    return nn::sigmoid(nn::conv2d_forward(h, in[3], in[4], 1, 1));
  };
  lc.op.backward = [](std::span<const Tensor> in, const Tensor& up) {
    const Tensor pre = nn::conv2d_forward(in[0], in[1], in[2], 2, 1);
    const Tensor h = nn::relu(pre);
    const Tensor y = nn::sigmoid(nn::conv2d_forward(h, in[3], in[4], 1, 1));
    const nn::ConvGrads g2 = nn::conv2d_backward(h, in[3], nn::sigmoid_backward(y, up), 1, 1);
    const nn::ConvGrads g1 = nn::conv2d_backward(in[0], in[1], nn::relu_backward(pre, g2.input), 2, 1);
    return std::vector<Tensor>{g1.input, g1.kernels, g1.bias, g2.kernels, g2.bias};
  };
  // Positive inputs and first-layer weights keep pre-activations away from 0.
  lc.inputs = {random_tensor({2, 6, 6}, rng, 0.1, 1.0), random_tensor({3, 2, 3, 3}, rng, 0.1, 1.0),
               random_tensor({3}, rng, 0.1, 0.5), random_tensor({1, 3, 3, 3}, rng),
               random_tensor({1}, rng)};
  return lc;
}

inline std::vector<std::pair<std::string, CaseFactory>> layer_factories() {
  return {{"conv2d", conv_case},           {"avg_pool", avg_pool_case}, {"sigmoid", sigmoid_case},
          {"relu", relu_case},             {"resize_bilinear", resize_case},
          {"concat_channels", concat_case}, {"mse_loss", mse_case},     {"chain", chain_case}};
}

inline constexpr double kSuiteEpsilon = 1e-5;
inline constexpr double kSuiteTolerance = 1e-4;
inline constexpr int kSuiteCases = 20;

/// Worst relative error over kSuiteCases random cases of one layer.
inline double layer_worst_error(const CaseFactory& factory, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < kSuiteCases; ++i) {
    LayerCase lc = factory(rng);
    const nn::GradCheckReport r =
        nn::grad_check(lc.op, lc.inputs, kSuiteEpsilon, kSuiteTolerance, seed * 1000 + static_cast<std::uint64_t>(i));
    worst = std::max(worst, r.max_rel_error);
  }
  return worst;
}

}  // namespace roitrack::test
