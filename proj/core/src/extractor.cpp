#include "roitrack/extractor.hpp"

#include <algorithm>
#include <cmath>

#include "roitrack/error.hpp"
#include "roitrack/nn.hpp"
#include "roitrack/rng.hpp"

namespace roitrack::extractor {
namespace {

std::vector<ConvLayer>& group_layers(ModelParams& p, LayerGroup g) {
  switch (g) {
    case LayerGroup::B224:
    case LayerGroup::B112:
    case LayerGroup::B56:
      return p.branches[static_cast<std::size_t>(g)];
    case LayerGroup::Template:
      return p.template_branch;
    case LayerGroup::Head:
      break;
  }
  return p.head;
}

// Activations kept for the backward pass of a conv+ReLU stack.
struct StackTape {
  std::vector<Tensor> inputs;
  std::vector<Tensor> pre_activations;
  Tensor output;
};

StackTape forward_stack(const std::vector<ConvLayer>& layers, Tensor x) {
  StackTape tape;
  for (const ConvLayer& layer : layers) {
    Tensor z = nn::conv2d_forward(x, layer.weight, layer.bias, layer.stride, layer.padding);
    tape.inputs.push_back(std::move(x));
    x = nn::relu(z);
    tape.pre_activations.push_back(std::move(z));
  }
  tape.output = std::move(x);
  return tape;
}

// Accumulates layer gradients into `grads`. Stacks start at an image, so no
// input gradient is produced.
void backward_stack(const std::vector<ConvLayer>& layers, const StackTape& tape, Tensor upstream,
                      std::vector<ConvLayer>& grads) {
  for (std::size_t i = layers.size(); i-- > 0;) {
    const Tensor gz = nn::relu_backward(tape.pre_activations[i], upstream);
    nn::ConvGrads g = nn::conv2d_backward(tape.inputs[i], layers[i].weight, gz, layers[i].stride,
                                          layers[i].padding, i > 0);
    auto acc = [](Tensor& dst, const Tensor& src) {
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    };
    acc(grads[i].weight, g.kernels);
    acc(grads[i].bias, g.bias);
    upstream = std::move(g.input);
  }
}

struct HeadTape {
  Tensor concat;
  Tensor hidden_pre;
  Tensor hidden;
  Tensor output;  // sigmoid, [1,28,28]
};

HeadTape forward_head(const std::vector<ConvLayer>& head, const Tensor& branch_out, const Tensor& template_maps) {
  HeadTape t;
  t.concat = nn::concat_channels(branch_out, template_maps);
  t.hidden_pre = nn::conv2d_forward(t.concat, head[0].weight, head[0].bias, head[0].stride, head[0].padding);
  t.hidden = nn::relu(t.hidden_pre);
  const Tensor logits = nn::conv2d_forward(t.hidden, head[1].weight, head[1].bias, head[1].stride, head[1].padding);
  t.output = nn::sigmoid(logits);
  return t;
}

void check_crop(const Image& crop, BranchId branch) {
  const std::size_t n = input_size(branch);
  if (crop.width() != n || crop.height() != n) {
    throw ShapeError(std::string("branch ") + branch_name(branch) + " expects a " + std::to_string(n) + "x" +
                     std::to_string(n) + " crop, got " + std::to_string(crop.width()) + "x" +
                     std::to_string(crop.height()));
  }
}

void check_template(const Image& templ) {
  if (templ.width() != kTemplateSize || templ.height() != kTemplateSize) {
    throw ShapeError("template must be " + std::to_string(kTemplateSize) + "x" + std::to_string(kTemplateSize) +
                     ", got " + std::to_string(templ.width()) + "x" + std::to_string(templ.height()));
  }
}

void check_features(const TemplateFeatures& f) {
  const Shape expected{kTemplateChannels, kRoiSide, kRoiSide};
  if (f.maps.shape() != expected) {
    throw ShapeError("template features must be " + to_string(expected) + ", got " + to_string(f.maps.shape()));
  }
}

RoiMatrix to_roi(const Tensor& output) {
  RoiMatrix roi;
  std::copy(output.data().begin(), output.data().end(), roi.cells.begin());
  return roi;
}

}  // namespace

std::size_t input_size(BranchId branch) {
  switch (branch) {
    case BranchId::B224:
      return 224;
    case BranchId::B112:
      return 112;
    case BranchId::B56:
      return 56;
  }
  throw ParameterError("unknown branch");
}

const char* branch_name(BranchId branch) {
  switch (branch) {
    case BranchId::B224:
      return "B224";
    case BranchId::B112:
      return "B112";
    case BranchId::B56:
      return "B56";
  }
  return "?";
}

BranchId select_branch(double window_w, double window_h, const BranchThresholds& thresholds) {
  const double side = std::max(window_w, window_h);
  if (side <= thresholds.small) return BranchId::B56;
  if (side <= thresholds.medium) return BranchId::B112;
  return BranchId::B224;
}

const std::vector<LayerSpec>& architecture() {
  static const std::vector<LayerSpec> layers = {
      {LayerGroup::B224, 16, 3, 3, 2, 1},
      {LayerGroup::B224, 32, 16, 3, 2, 1},
      {LayerGroup::B224, 32, 32, 3, 2, 1},
      {LayerGroup::B112, 16, 3, 3, 2, 1},
      {LayerGroup::B112, 32, 16, 3, 2, 1},
      {LayerGroup::B56, 32, 3, 3, 2, 1},
      {LayerGroup::Template, 16, 3, 3, 2, 1},
      {LayerGroup::Template, 16, 16, 3, 2, 1},
      {LayerGroup::Head, 32, kBranchChannels + kTemplateChannels, 3, 1, 1},
      {LayerGroup::Head, 1, 32, 3, 1, 1},
  };
  return layers;
}

std::vector<Tensor*> ModelParams::tensors() {
  std::vector<Tensor*> out;
  for (auto* group : {&branches[0], &branches[1], &branches[2], &template_branch, &head}) {
    for (ConvLayer& layer : *group) {
      out.push_back(&layer.weight);
      out.push_back(&layer.bias);
    }
  }
  return out;
}

std::vector<const Tensor*> ModelParams::tensors() const {
  std::vector<const Tensor*> out;
  for (Tensor* t : const_cast<ModelParams*>(this)->tensors()) out.push_back(t);
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : tensors()) n += t->size();
  return n;
}

ModelParams build_model(std::uint64_t seed) {
  ModelParams params;
  Rng rng(seed);
  for (const LayerSpec& spec : architecture()) {
    ConvLayer layer;
    layer.stride = static_cast<int>(spec.stride);
    layer.padding = static_cast<int>(spec.padding);
    layer.weight = Tensor({spec.out_channels, spec.in_channels, spec.kernel, spec.kernel});
    layer.bias = Tensor({spec.out_channels});
    const double fan_in = static_cast<double>(spec.in_channels * spec.kernel * spec.kernel);
    // He-uniform: keeps ReLU activations from shrinking through the stack.
    const double bound = std::sqrt(6.0 / fan_in);
    for (double& w : layer.weight.data()) w = rng.uniform(-bound, bound);
    group_layers(params, spec.group).push_back(std::move(layer));
  }
  return params;
}

ModelGrads zeros_like(const ModelParams& params) {
  ModelGrads grads = params;
  for (Tensor* t : grads.tensors()) std::fill(t->data().begin(), t->data().end(), 0.0);
  return grads;
}

ModelParams sgd_step(ModelParams params, const ModelGrads& grads, double learning_rate) {
  const std::vector<Tensor*> p = params.tensors();
  const std::vector<const Tensor*> g = grads.tensors();
  nn::sgd_update(p, g, learning_rate);
  return params;
}

Tensor image_to_tensor(const Image& image) {
  const std::size_t w = image.width();
  const std::size_t h = image.height();
  Tensor t({Image::kChannels, h, w});
  const std::span<const float> src = image.data();
  for (std::size_t c = 0; c < Image::kChannels; ++c) {
    double* dst = t.data().data() + c * h * w;
    for (std::size_t i = 0; i < h * w; ++i) dst[i] = static_cast<double>(src[i * Image::kChannels + c]) - 0.5;
  }
  return t;
}

TemplateFeatures encode_template(const ModelParams& params, const Image& templ) {
  check_template(templ);
  const StackTape tape = forward_stack(params.template_branch, image_to_tensor(templ));
  return {nn::resize_bilinear(tape.output, kRoiSide, kRoiSide), templ.width(), templ.height()};
}

RoiMatrix extract_roi_matrix(const ModelParams& params, const Image& crop, const TemplateFeatures& features,
                             BranchId branch) {
  check_crop(crop, branch);
  check_features(features);
  const StackTape tape = forward_stack(params.branches[static_cast<std::size_t>(branch)], image_to_tensor(crop));
  return to_roi(forward_head(params.head, tape.output, features.maps).output);
}

BatchGradient batch_gradient(const ModelParams& params, const Image& templ, std::span<const TrainingFrame> frames) {
  check_template(templ);
  if (frames.empty()) throw ParameterError("batch_gradient: empty batch");
  BatchGradient result{0.0, zeros_like(params)};

  const StackTape template_tape = forward_stack(params.template_branch, image_to_tensor(templ));
  const Tensor template_maps = nn::resize_bilinear(template_tape.output, kRoiSide, kRoiSide);
  Tensor template_grad(template_maps.shape());

  const double frame_weight = 1.0 / static_cast<double>(frames.size());
  for (const TrainingFrame& frame : frames) {
    check_crop(frame.crop, frame.branch);
    const auto b = static_cast<std::size_t>(frame.branch);
    const StackTape branch_tape = forward_stack(params.branches[b], image_to_tensor(frame.crop));
    const HeadTape head = forward_head(params.head, branch_tape.output, template_maps);

    const Tensor target({1, kRoiSide, kRoiSide},
                        std::vector<double>(frame.target.cells.begin(), frame.target.cells.end()));
    nn::LossResult loss = nn::mse_loss(head.output, target);
    result.loss += loss.loss * frame_weight;
    for (double& g : loss.grad.data()) g *= frame_weight;

    const Tensor g_logits = nn::sigmoid_backward(head.output, loss.grad);
    nn::ConvGrads g_out = nn::conv2d_backward(head.hidden, params.head[1].weight, g_logits, params.head[1].stride,
                                              params.head[1].padding);
    const Tensor g_hidden_pre = nn::relu_backward(head.hidden_pre, g_out.input);
    nn::ConvGrads g_hidden = nn::conv2d_backward(head.concat, params.head[0].weight, g_hidden_pre,
                                                 params.head[0].stride, params.head[0].padding);
    auto acc = [](Tensor& dst, const Tensor& src) {
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    };
    acc(result.grads.head[1].weight, g_out.kernels);
    acc(result.grads.head[1].bias, g_out.bias);
    acc(result.grads.head[0].weight, g_hidden.kernels);
    acc(result.grads.head[0].bias, g_hidden.bias);

    auto [g_branch, g_template] = nn::split_channels(g_hidden.input, kBranchChannels);
    acc(template_grad, g_template);
    backward_stack(params.branches[b], branch_tape, std::move(g_branch), result.grads.branches[b]);
  }

  const Tensor g_template_out = nn::resize_bilinear_backward(template_tape.output.shape(), template_grad);
  backward_stack(params.template_branch, template_tape, g_template_out, result.grads.template_branch);
  return result;
}

}  // namespace roitrack::extractor
