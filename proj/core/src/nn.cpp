#include "roitrack/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "roitrack/error.hpp"

namespace roitrack::nn {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

struct ConvGeometry {
  std::size_t channels, height, width;
  std::size_t filters, kh, kw;
  std::size_t out_h, out_w;
  int stride, padding;

  std::size_t patch() const { return channels * kh * kw; }
  std::size_t out_pixels() const { return out_h * out_w; }
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernels, int stride, int padding) {
  if (input.rank() != 3) {
    throw ShapeError("conv2d input must be [C,H,W], got " + to_string(input.shape()));
  }
  if (kernels.rank() != 4) {
    throw ShapeError("conv2d kernels must be [K,C,kh,kw], got " + to_string(kernels.shape()));
  }
  if (stride < 1 || padding < 0) {
    throw ParameterError("conv2d needs stride >= 1 and padding >= 0");
  }
  ConvGeometry g{};
  g.channels = input.dim(0);
  g.height = input.dim(1);
  g.width = input.dim(2);
  g.filters = kernels.dim(0);
  g.kh = kernels.dim(2);
  g.kw = kernels.dim(3);
  g.stride = stride;
  g.padding = padding;
  if (kernels.dim(1) != g.channels) {
    throw ShapeError("conv2d kernel channels " + std::to_string(kernels.dim(1)) +
                     " do not match input channels " + std::to_string(g.channels));
  }
  const std::size_t pad2 = 2 * static_cast<std::size_t>(padding);
  if (g.kh > g.height + pad2 || g.kw > g.width + pad2) {
    throw ShapeError("conv2d kernel " + to_string(kernels.shape()) + " larger than padded input " +
                     to_string(input.shape()));
  }
  g.out_h = conv_output_size(g.height, g.kh, stride, padding);
  g.out_w = conv_output_size(g.width, g.kw, stride, padding);
  return g;
}

// Output columns [lo, hi) whose input column ox*stride - padding + kj lies
// inside [0, width).
struct ValidSpan {
  std::size_t lo, hi;
};

ValidSpan valid_columns(const ConvGeometry& g, std::size_t kj) {
  const long s = g.stride;
  const long off = static_cast<long>(kj) - g.padding;
  const long w = static_cast<long>(g.width);
  const long out_w = static_cast<long>(g.out_w);
  long lo = off >= 0 ? 0 : (-off + s - 1) / s;
  long hi = (w - 1 - off) < 0 ? 0 : (w - 1 - off) / s + 1;
  lo = std::min(lo, out_w);
  hi = std::clamp(hi, lo, out_w);
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// Per-thread scratch reused across calls; the im2col matrices of the larger
// layers are megabytes and fresh allocations of that size cost page faults.
MatrixMap scratch(int slot, std::size_t rows, std::size_t cols) {
  thread_local std::vector<double> buffers[2];
  std::vector<double>& b = buffers[slot];
  if (b.size() < rows * cols) b.resize(rows * cols);
  return MatrixMap(b.data(), static_cast<long>(rows), static_cast<long>(cols));
}

// Unfolds input patches into a [C*kh*kw, out_h*out_w] matrix.
void im2col(const Tensor& input, const ConvGeometry& g, MatrixMap& cols) {
  const double* in = input.data().data();
  const long h = static_cast<long>(g.height);
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        double* row = cols.row(static_cast<long>((c * g.kh + ki) * g.kw + kj)).data();
        const ValidSpan span = valid_columns(g, kj);
        const long off = static_cast<long>(kj) - g.padding;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy) * g.stride - g.padding + static_cast<long>(ki);
          double* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = in + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          std::fill(dst, dst + span.lo, 0.0);
          if (g.stride == 1) {
            std::copy(src + static_cast<long>(span.lo) + off, src + static_cast<long>(span.hi) + off, dst + span.lo);
          } else {
            for (std::size_t ox = span.lo; ox < span.hi; ++ox) dst[ox] = src[static_cast<long>(ox) * g.stride + off];
          }
          std::fill(dst + span.hi, dst + g.out_w, 0.0);
        }
      }
    }
  }
}

void col2im(const MatrixMap& cols, const ConvGeometry& g, Tensor& grad_input) {
  double* out = grad_input.data().data();
  const long h = static_cast<long>(g.height);
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const double* row = cols.row(static_cast<long>((c * g.kh + ki) * g.kw + kj)).data();
        const ValidSpan span = valid_columns(g, kj);
        const long off = static_cast<long>(kj) - g.padding;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy) * g.stride - g.padding + static_cast<long>(ki);
          if (iy < 0 || iy >= h) continue;
          double* dst = out + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          const double* src = row + oy * g.out_w;
          for (std::size_t ox = span.lo; ox < span.hi; ++ox) dst[static_cast<long>(ox) * g.stride + off] += src[ox];
        }
      }
    }
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

struct Tap {
  std::size_t lo, hi;
  double frac;
};

Tap bilinear_tap(std::size_t dst, std::size_t in_size, std::size_t out_size) {
  const double scale = static_cast<double>(in_size) / static_cast<double>(out_size);
  double src = (static_cast<double>(dst) + 0.5) * scale - 0.5;
  src = std::clamp(src, 0.0, static_cast<double>(in_size - 1));
  const auto lo = static_cast<std::size_t>(std::floor(src));
  const std::size_t hi = std::min(lo + 1, in_size - 1);
  return {lo, hi, src - static_cast<double>(lo)};
}

}  // namespace

std::size_t conv_output_size(std::size_t in, std::size_t kernel, int stride, int padding) {
  return (in + 2 * static_cast<std::size_t>(padding) - kernel) / static_cast<std::size_t>(stride) + 1;
}

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias, int stride,
                      int padding) {
  const ConvGeometry g = conv_geometry(input, kernels, stride, padding);
  if (bias.rank() != 1 || bias.dim(0) != g.filters) {
    throw ShapeError("conv2d bias must be [" + std::to_string(g.filters) + "], got " +
                     to_string(bias.shape()));
  }
  MatrixMap cols = scratch(0, g.patch(), g.out_pixels());
  im2col(input, g, cols);
  Tensor out({g.filters, g.out_h, g.out_w});
  MatrixMap out_mat(out.data().data(), static_cast<long>(g.filters),
                    static_cast<long>(g.out_pixels()));
  ConstMatrixMap weights(kernels.data().data(), static_cast<long>(g.filters),
                         static_cast<long>(g.patch()));
  if (g.filters == 1) {
    // Eigen routes one-row products to GEMV, whose summation order follows
    // pointer alignment. A fixed loop keeps results bitwise reproducible.
    out_mat.setZero();
    for (long p = 0; p < cols.rows(); ++p) out_mat.row(0) += weights(0, p) * cols.row(p);
  } else {
    out_mat.noalias() = weights * cols;
  }
  for (std::size_t k = 0; k < g.filters; ++k) {
    out_mat.row(static_cast<long>(k)).array() += bias[k];
  }
  return out;
}

ConvGrads conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& upstream,
                          int stride, int padding, bool input_grad) {
  const ConvGeometry g = conv_geometry(input, kernels, stride, padding);
  const Shape expected{g.filters, g.out_h, g.out_w};
  if (upstream.shape() != expected) {
    throw ShapeError("conv2d upstream gradient must be " + to_string(expected) + ", got " +
                     to_string(upstream.shape()));
  }
  MatrixMap cols = scratch(0, g.patch(), g.out_pixels());
  im2col(input, g, cols);
  ConstMatrixMap up(upstream.data().data(), static_cast<long>(g.filters),
                    static_cast<long>(g.out_pixels()));
  ConstMatrixMap weights(kernels.data().data(), static_cast<long>(g.filters),
                         static_cast<long>(g.patch()));

  ConvGrads grads{input_grad ? Tensor(input.shape()) : Tensor(), Tensor(kernels.shape()), Tensor({g.filters})};
  MatrixMap kgrad(grads.kernels.data().data(), static_cast<long>(g.filters),
                  static_cast<long>(g.patch()));
  if (g.filters == 1) {
    // Same alignment-independent ordering as the forward pass.
    for (long p = 0; p < cols.rows(); ++p) {
      const double* c = &cols(p, 0);
      double acc = 0.0;
      for (long n = 0; n < cols.cols(); ++n) acc += up(0, n) * c[n];
      kgrad(0, p) = acc;
    }
  } else {
    kgrad.noalias() = up * cols.transpose();
  }
  for (std::size_t k = 0; k < g.filters; ++k) {
    const double* row = upstream.data().data() + k * g.out_pixels();
    grads.bias[k] = std::accumulate(row, row + g.out_pixels(), 0.0);
  }
  if (!input_grad) return grads;
  MatrixMap col_grad = scratch(1, g.patch(), g.out_pixels());
  col_grad.noalias() = weights.transpose() * up;
  col2im(col_grad, g, grads.input);
  return grads;
}

Tensor avg_pool(const Tensor& input, int kernel, int stride) {
  if (kernel < 1 || stride < 1) throw ParameterError("avg_pool kernel and stride must be >= 1");
  if (input.rank() != 2) throw ShapeError("avg_pool input must be [H,W], got " + to_string(input.shape()));
  const auto k = static_cast<std::size_t>(kernel);
  const auto s = static_cast<std::size_t>(stride);
  if (k > input.dim(0) || k > input.dim(1)) {
    throw ShapeError("avg_pool kernel larger than input " + to_string(input.shape()));
  }
  const std::size_t oh = (input.dim(0) - k) / s + 1;
  const std::size_t ow = (input.dim(1) - k) / s + 1;
  Tensor out({oh, ow});
  // Divide rather than scale by 1/k^2 so integer cell sums give correctly rounded fractions.
  const auto area = static_cast<double>(k * k);
  for (std::size_t i = 0; i < oh; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      double acc = 0.0;
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) acc += input.at(i * s + a, j * s + b);
      }
      out.at(i, j) = acc / area;
    }
  }
  return out;
}

Tensor avg_pool_backward(const Shape& input_shape, const Tensor& upstream, int kernel, int stride) {
  if (kernel < 1 || stride < 1) throw ParameterError("avg_pool kernel and stride must be >= 1");
  const auto k = static_cast<std::size_t>(kernel);
  const auto s = static_cast<std::size_t>(stride);
  Tensor grad(input_shape);
  const double inv = 1.0 / static_cast<double>(k * k);
  for (std::size_t i = 0; i < upstream.dim(0); ++i) {
    for (std::size_t j = 0; j < upstream.dim(1); ++j) {
      const double g = upstream.at(i, j) * inv;
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) grad.at(i * s + a, j * s + b) += g;
      }
    }
  }
  return grad;
}

Tensor sigmoid(const Tensor& input) {
  Tensor out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double x = input[i];
    // Split by sign so exp() never overflows.
    if (x >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-x));
    } else {
      const double e = std::exp(x);
      out[i] = e / (1.0 + e);
    }
  }
  return out;
}

Tensor sigmoid_backward(const Tensor& output, const Tensor& upstream) {
  require_same_shape(output, upstream, "sigmoid_backward");
  Tensor grad(output.shape());
  for (std::size_t i = 0; i < output.size(); ++i) {
    grad[i] = upstream[i] * output[i] * (1.0 - output[i]);
  }
  return grad;
}

Tensor relu(const Tensor& input) {
  Tensor out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? input[i] : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& upstream) {
  require_same_shape(input, upstream, "relu_backward");
  Tensor grad(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) grad[i] = input[i] > 0.0 ? upstream[i] : 0.0;
  return grad;
}

Tensor resize_bilinear(const Tensor& input, std::size_t out_h, std::size_t out_w) {
  if (input.rank() != 3) throw ShapeError("resize_bilinear input must be [C,H,W]");
  if (out_h == 0 || out_w == 0) throw ParameterError("resize_bilinear output must be non-empty");
  const std::size_t channels = input.dim(0);
  Tensor out({channels, out_h, out_w});
  for (std::size_t y = 0; y < out_h; ++y) {
    const Tap ty = bilinear_tap(y, input.dim(1), out_h);
    for (std::size_t x = 0; x < out_w; ++x) {
      const Tap tx = bilinear_tap(x, input.dim(2), out_w);
      for (std::size_t c = 0; c < channels; ++c) {
        const double top = (1.0 - tx.frac) * input.at(c, ty.lo, tx.lo) + tx.frac * input.at(c, ty.lo, tx.hi);
        const double bot = (1.0 - tx.frac) * input.at(c, ty.hi, tx.lo) + tx.frac * input.at(c, ty.hi, tx.hi);
        out.at(c, y, x) = (1.0 - ty.frac) * top + ty.frac * bot;
      }
    }
  }
  return out;
}

Tensor resize_bilinear_backward(const Shape& input_shape, const Tensor& upstream) {
  if (input_shape.size() != 3 || upstream.rank() != 3 || upstream.dim(0) != input_shape[0]) {
    throw ShapeError("resize_bilinear_backward shape mismatch");
  }
  Tensor grad(input_shape);
  const std::size_t out_h = upstream.dim(1);
  const std::size_t out_w = upstream.dim(2);
  for (std::size_t y = 0; y < out_h; ++y) {
    const Tap ty = bilinear_tap(y, input_shape[1], out_h);
    for (std::size_t x = 0; x < out_w; ++x) {
      const Tap tx = bilinear_tap(x, input_shape[2], out_w);
      for (std::size_t c = 0; c < input_shape[0]; ++c) {
        const double g = upstream.at(c, y, x);
        grad.at(c, ty.lo, tx.lo) += g * (1.0 - ty.frac) * (1.0 - tx.frac);
        grad.at(c, ty.lo, tx.hi) += g * (1.0 - ty.frac) * tx.frac;
        grad.at(c, ty.hi, tx.lo) += g * ty.frac * (1.0 - tx.frac);
        grad.at(c, ty.hi, tx.hi) += g * ty.frac * tx.frac;
      }
    }
  }
  return grad;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2)) {
    throw ShapeError("concat_channels needs [C,H,W] maps with equal H,W: " + to_string(a.shape()) +
                     " vs " + to_string(b.shape()));
  }
  Tensor out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  std::copy(b.data().begin(), b.data().end(), out.data().begin() + static_cast<long>(a.size()));
  return out;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& upstream, std::size_t channels_a) {
  if (upstream.rank() != 3 || channels_a > upstream.dim(0)) {
    throw ShapeError("split_channels: cannot take " + std::to_string(channels_a) +
                     " channels from " + to_string(upstream.shape()));
  }
  const std::size_t plane = upstream.dim(1) * upstream.dim(2);
  Tensor a({channels_a, upstream.dim(1), upstream.dim(2)});
  Tensor b({upstream.dim(0) - channels_a, upstream.dim(1), upstream.dim(2)});
  const auto mid = upstream.data().begin() + static_cast<long>(channels_a * plane);
  std::copy(upstream.data().begin(), mid, a.data().begin());
  std::copy(mid, upstream.data().end(), b.data().begin());
  return {std::move(a), std::move(b)};
}

LossResult mse_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "mse_loss");
  LossResult r{0.0, Tensor(pred.shape())};
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    r.loss += d * d;
    r.grad[i] = 2.0 * d / n;
  }
  r.loss /= n;
  return r;
}

void sgd_update(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
                double learning_rate) {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ParameterError("learning rate must be finite and >= 0");
  }
  if (params.size() != grads.size()) {
    throw ShapeError("sgd_update: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i]->shape()) {
      throw ShapeError("sgd_update: gradient " + std::to_string(i) + " has shape " +
                       to_string(grads[i]->shape()) + ", parameter has " +
                       to_string(params[i]->shape()));
    }
    if (!grads[i]->all_finite()) {
      throw TrainingError("non-finite gradient for parameter tensor " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    const auto g = grads[i]->data();
    for (std::size_t j = 0; j < p.size(); ++j) p[j] -= learning_rate * g[j];
  }
}

}  // namespace roitrack::nn
