#pragma once

#include <cstddef>
#include <span>

#include "roitrack/tensor.hpp"

// Forward and backward passes for the handful of layers the extractor uses.
// Every function is pure. Layouts: feature maps are [C,H,W], convolution
// kernels [K,C,kh,kw], biases [K].
namespace roitrack::nn {

struct ConvGrads {
  Tensor input;
  Tensor kernels;
  Tensor bias;
};

/// Cross-correlation (no kernel flip) with zero padding.
Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                      int stride, int padding);

/// With input_grad false the returned input gradient is empty; the first
/// layer of a stack never needs it.
ConvGrads conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& upstream,
                          int stride, int padding, bool input_grad = true);

std::size_t conv_output_size(std::size_t in, std::size_t kernel, int stride, int padding);

/// Average pooling over a [H,W] map (no padding).
Tensor avg_pool(const Tensor& input, int kernel, int stride);
Tensor avg_pool_backward(const Shape& input_shape, const Tensor& upstream, int kernel, int stride);

Tensor sigmoid(const Tensor& input);
/// Takes the forward *output*, since sigmoid' = y(1-y).
Tensor sigmoid_backward(const Tensor& output, const Tensor& upstream);

Tensor relu(const Tensor& input);
/// Subgradient 0 at x == 0.
Tensor relu_backward(const Tensor& input, const Tensor& upstream);

/// Bilinear resampling of a [C,H,W] map with half-pixel centers and edge clamping.
Tensor resize_bilinear(const Tensor& input, std::size_t out_h, std::size_t out_w);
Tensor resize_bilinear_backward(const Shape& input_shape, const Tensor& upstream);

/// Channel-wise concatenation of two [C,H,W] maps with equal H and W.
Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Splits a gradient of concat_channels back into its two parts.
std::pair<Tensor, Tensor> split_channels(const Tensor& upstream, std::size_t channels_a);

struct LossResult {
  double loss = 0.0;
  Tensor grad;
};

/// loss = mean((pred - target)^2), grad = 2 (pred - target) / N.
LossResult mse_loss(const Tensor& pred, const Tensor& target);

/// p <- p - lr * g for each pair. Throws TrainingError on a non-finite
/// gradient (before touching any parameter), ParameterError on lr < 0,
/// ShapeError on mismatched shapes.
void sgd_update(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
                double learning_rate);

}  // namespace roitrack::nn
