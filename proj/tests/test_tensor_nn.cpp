#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "roitrack/error.hpp"
#include "roitrack/nn.hpp"
#include "roitrack/rng.hpp"
#include "test_util.hpp"

using namespace roitrack;
using roitrack::test::random_tensor;

namespace {

// Independent reference: direct 6-deep loop over the definition.
Tensor naive_conv(const Tensor& x, const Tensor& k, const Tensor& b, int stride, int pad) {
  const long C = static_cast<long>(x.dim(0)), H = static_cast<long>(x.dim(1)), W = static_cast<long>(x.dim(2));
  const long K = static_cast<long>(k.dim(0)), kh = static_cast<long>(k.dim(2)), kw = static_cast<long>(k.dim(3));
  const long oh = (H + 2 * pad - kh) / stride + 1;
  const long ow = (W + 2 * pad - kw) / stride + 1;
  Tensor y({static_cast<std::size_t>(K), static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)});
  for (long f = 0; f < K; ++f)
    for (long i = 0; i < oh; ++i)
      for (long j = 0; j < ow; ++j) {
        double acc = b[static_cast<std::size_t>(f)];
        for (long c = 0; c < C; ++c)
          for (long a = 0; a < kh; ++a)
            for (long d = 0; d < kw; ++d) {
              const long yi = i * stride - pad + a, xj = j * stride - pad + d;
              if (yi < 0 || yi >= H || xj < 0 || xj >= W) continue;
              acc += x[static_cast<std::size_t>((c * H + yi) * W + xj)] *
                     k[static_cast<std::size_t>(((f * C + c) * kh + a) * kw + d)];
            }
        y[static_cast<std::size_t>((f * oh + i) * ow + j)] = acc;
      }
  return y;
}

}  // namespace

TEST(Tensor, ShapeDataMismatchThrows) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
  EXPECT_NO_THROW(Tensor({2, 3}, std::vector<double>(6)));
}

TEST(Tensor, ReshapeKeepsData) {
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor r = t.reshaped({3, 2});
  EXPECT_EQ(r.values(), t.values());
  EXPECT_EQ(r.at(2, 1), 6.0);
  EXPECT_THROW(t.reshaped({4, 2}), ShapeError);
}

TEST(Conv2d, IdentityKernel) {
  Tensor x({1, 3, 3}, 1.0);
  Tensor k({1, 1, 1, 1}, 1.0);
  Tensor y = nn::conv2d_forward(x, k, Tensor({1}), 1, 0);
  EXPECT_EQ(y.shape(), (Shape{1, 3, 3}));
  for (double v : y.data()) EXPECT_EQ(v, 1.0);
}

TEST(Conv2d, FullWindowSum) {
  Tensor x({1, 2, 2}, {1, 2, 3, 4});
  Tensor k({1, 1, 2, 2}, 1.0);
  Tensor y = nn::conv2d_forward(x, k, Tensor({1}), 1, 0);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1}));
  EXPECT_EQ(y[0], 10.0);
}

TEST(Conv2d, MatchesNaiveOracle) {
  Rng rng(7);
  const Tensor x = random_tensor({3, 8, 8}, rng);
  const Tensor k = random_tensor({4, 3, 3, 3}, rng);
  const Tensor b = random_tensor({4}, rng);
  const Tensor y = nn::conv2d_forward(x, k, b, 1, 1);
  const Tensor ref = naive_conv(x, k, b, 1, 1);
  ASSERT_EQ(y.shape(), ref.shape());
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12);
}

TEST(Conv2d, MatchesNaiveOracleAcrossGeometries) {
  Rng rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t c = 1 + rng.below(4), k = 1 + rng.below(4);
    const std::size_t h = 3 + rng.below(14), w = 3 + rng.below(14);
    const std::size_t ks = 1 + rng.below(3);
    const int stride = 1 + static_cast<int>(rng.below(3));
    const int pad = static_cast<int>(rng.below(2));
    const Tensor x = random_tensor({c, h, w}, rng);
    const Tensor kern = random_tensor({k, c, ks, ks}, rng);
    const Tensor b = random_tensor({k}, rng);
    const Tensor y = nn::conv2d_forward(x, kern, b, stride, pad);
    const Tensor ref = naive_conv(x, kern, b, stride, pad);
    ASSERT_EQ(y.shape(), ref.shape()) << "trial " << trial;
    for (std::size_t i = 0; i < y.size(); ++i) ASSERT_NEAR(y[i], ref[i], 1e-12) << "trial " << trial;
  }
}

TEST(Conv2d, OutputSizeFormula) {
  EXPECT_EQ(nn::conv_output_size(224, 3, 2, 1), 112u);
  EXPECT_EQ(nn::conv_output_size(56, 3, 2, 1), 28u);
  EXPECT_EQ(nn::conv_output_size(28, 3, 1, 1), 28u);
  EXPECT_EQ(nn::conv_output_size(5, 5, 1, 0), 1u);
}

TEST(Conv2d, ChannelMismatchIsShapeError) {
  EXPECT_THROW(nn::conv2d_forward(Tensor({2, 4, 4}), Tensor({1, 3, 3, 3}), Tensor({1}), 1, 1), ShapeError);
  EXPECT_THROW(nn::conv2d_forward(Tensor({3, 4, 4}), Tensor({2, 3, 3, 3}), Tensor({3}), 1, 1), ShapeError);
  EXPECT_THROW(nn::conv2d_forward(Tensor({1, 2, 2}), Tensor({1, 1, 5, 5}), Tensor({1}), 1, 0), ShapeError);
  EXPECT_THROW(nn::conv2d_forward(Tensor({1, 4, 4}), Tensor({1, 1, 3, 3}), Tensor({1}), 0, 0), ParameterError);
}

TEST(Conv2dBackward, ZeroUpstreamGivesZeroGrads) {
  Rng rng(3);
  const Tensor x = random_tensor({2, 5, 5}, rng);
  const Tensor k = random_tensor({3, 2, 3, 3}, rng);
  const nn::ConvGrads g = nn::conv2d_backward(x, k, Tensor({3, 5, 5}), 1, 1);
  for (const Tensor* t : {&g.input, &g.kernels, &g.bias})
    for (double v : t->data()) EXPECT_EQ(v, 0.0);
}

TEST(Conv2dBackward, ScalarChainRule) {
  const Tensor x({1, 1, 1}, {0.7});
  const Tensor k({1, 1, 1, 1}, {1.0});
  const nn::ConvGrads g = nn::conv2d_backward(x, k, Tensor({1, 1, 1}, {1.0}), 1, 0);
  EXPECT_EQ(g.kernels[0], 0.7);
  EXPECT_EQ(g.input[0], 1.0);
  EXPECT_EQ(g.bias[0], 1.0);
}

TEST(Conv2dBackward, UpstreamShapeChecked) {
  EXPECT_THROW(nn::conv2d_backward(Tensor({1, 4, 4}), Tensor({1, 1, 3, 3}), Tensor({1, 3, 3}), 1, 1), ShapeError);
}

TEST(Conv2dBackward, SkippingInputGradLeavesOtherGradsUnchanged) {
  Rng rng(5);
  const Tensor x = random_tensor({3, 9, 9}, rng);
  const Tensor k = random_tensor({4, 3, 3, 3}, rng);
  const Tensor up = random_tensor({4, 5, 5}, rng);
  const nn::ConvGrads full = nn::conv2d_backward(x, k, up, 2, 1);
  const nn::ConvGrads partial = nn::conv2d_backward(x, k, up, 2, 1, false);
  EXPECT_EQ(full.kernels, partial.kernels);
  EXPECT_EQ(full.bias, partial.bias);
  EXPECT_EQ(partial.input.size(), 0u);
}

TEST(AvgPool, ConstantAndZeroInputs) {
  const Tensor ones = nn::avg_pool(Tensor({28, 28}, 1.0), 14, 14);
  EXPECT_EQ(ones.shape(), (Shape{2, 2}));
  for (double v : ones.data()) EXPECT_EQ(v, 1.0);
  const Tensor zeros = nn::avg_pool(Tensor({28, 28}), 14, 14);
  for (double v : zeros.data()) EXPECT_EQ(v, 0.0);
}

TEST(AvgPool, QuadrantCount) {
  Tensor x({28, 28});
  for (std::size_t n = 0; n < 49; ++n) x.at(n / 7, n % 7) = 1.0;
  const Tensor y = nn::avg_pool(x, 14, 14);
  EXPECT_DOUBLE_EQ(y.at(0, 0), 49.0 / 196.0);
  EXPECT_EQ(y.at(0, 1), 0.0);
  EXPECT_EQ(y.at(1, 0), 0.0);
  EXPECT_EQ(y.at(1, 1), 0.0);
}

TEST(AvgPool, FullKernelIsExactMean) {
  Rng rng(9);
  const Tensor x = random_tensor({6, 6}, rng);
  EXPECT_NEAR(nn::avg_pool(x, 6, 6)[0], x.sum() / 36.0, 1e-15);
}

TEST(AvgPool, QuadrantPoolPreservesMean) {
  Rng rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor x = random_tensor({28, 28}, rng, 0.0, 1.0);
    EXPECT_NEAR(nn::avg_pool(x, 14, 14).sum() / 4.0, x.sum() / 784.0, 1e-12);
  }
}

TEST(AvgPool, InvalidArguments) {
  EXPECT_THROW(nn::avg_pool(Tensor({4, 4}), 0, 1), ParameterError);
  EXPECT_THROW(nn::avg_pool(Tensor({4, 4}), 2, 0), ParameterError);
  EXPECT_THROW(nn::avg_pool(Tensor({4, 4}), 5, 1), ShapeError);
}

TEST(Sigmoid, KnownValues) {
  const Tensor y = nn::sigmoid(Tensor({3}, {0.0, 1.0, -1000.0}));
  EXPECT_EQ(y[0], 0.5);
  EXPECT_NEAR(y[1], 0.7310586, 1e-7);
  EXPECT_LT(y[2], 1e-6);
  EXPECT_GE(y[2], 0.0);
  EXPECT_TRUE(std::isfinite(y[2]));
}

TEST(Sigmoid, OpenIntervalAndMonotone) {
  Tensor x({401});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = -30.0 + 0.15 * static_cast<double>(i);
  const Tensor y = nn::sigmoid(x);
  for (std::size_t i = 0; i < y.size(); ++i) {
    EXPECT_GT(y[i], 0.0);
    EXPECT_LT(y[i], 1.0);
    if (i > 0) EXPECT_GT(y[i], y[i - 1]);
  }
}

TEST(Relu, ForwardAndBackward) {
  const Tensor x({3}, {-1.0, 0.0, 2.0});
  EXPECT_EQ(nn::relu(x).values(), (std::vector<double>{0.0, 0.0, 2.0}));
  EXPECT_EQ(nn::relu_backward(x, Tensor({3}, 1.0)).values(), (std::vector<double>{0.0, 0.0, 1.0}));
  const Tensor clipped = nn::relu(Tensor({5}, -3.0));
  for (double v : clipped.data()) EXPECT_EQ(v, 0.0);
}

TEST(MseLoss, Values) {
  const Tensor a({4}, {0.1, 0.2, 0.3, 0.4});
  const nn::LossResult same = nn::mse_loss(a, a);
  EXPECT_EQ(same.loss, 0.0);
  for (double g : same.grad.data()) EXPECT_EQ(g, 0.0);

  const nn::LossResult one = nn::mse_loss(Tensor({1}, {1.0}), Tensor({1}, {0.0}));
  EXPECT_EQ(one.loss, 1.0);
  EXPECT_EQ(one.grad[0], 2.0);
  EXPECT_THROW(nn::mse_loss(Tensor({2}), Tensor({3})), ShapeError);
}

TEST(ResizeBilinear, IdentityAtSameSize) {
  Rng rng(4);
  const Tensor x = random_tensor({2, 5, 7}, rng);
  EXPECT_EQ(nn::resize_bilinear(x, 5, 7), x);
}

TEST(ResizeBilinear, UpsampleTwoByTwo) {
  // Half-pixel centers: output coordinate s = (d + 0.5) / 2 - 0.5 clamps to
  // [0, 1], giving taps {0, 0.25, 0.75, 1}.
  const Tensor x({1, 2, 2}, {0.0, 1.0, 1.0, 0.0});
  const Tensor y = nn::resize_bilinear(x, 4, 4);
  const double w[4] = {0.0, 0.25, 0.75, 1.0};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      const double expect = (1 - w[i]) * (w[j]) + w[i] * (1 - w[j]);
      EXPECT_NEAR(y.at(0, i, j), expect, 1e-15);
    }
}

TEST(ConcatSplit, RoundTrip) {
  Rng rng(8);
  const Tensor a = random_tensor({2, 3, 3}, rng);
  const Tensor b = random_tensor({3, 3, 3}, rng);
  const Tensor c = nn::concat_channels(a, b);
  EXPECT_EQ(c.shape(), (Shape{5, 3, 3}));
  const auto [ga, gb] = nn::split_channels(c, 2);
  EXPECT_EQ(ga, a);
  EXPECT_EQ(gb, b);
  EXPECT_THROW(nn::concat_channels(a, Tensor({1, 4, 3})), ShapeError);
}

TEST(SgdUpdate, Basics) {
  Tensor p({1}, {1.0});
  const Tensor g({1}, {0.25});
  Tensor* ps[] = {&p};
  const Tensor* gs[] = {&g};
  nn::sgd_update(ps, gs, 1.0);
  EXPECT_EQ(p[0], 0.75);

  Tensor q({3}, {1.0, 2.0, 3.0});
  const Tensor zero({3});
  Tensor* qs[] = {&q};
  const Tensor* zs[] = {&zero};
  nn::sgd_update(qs, zs, 0.7);
  EXPECT_EQ(q.values(), (std::vector<double>{1.0, 2.0, 3.0}));
  const Tensor big({3}, 5.0);
  const Tensor* bs[] = {&big};
  nn::sgd_update(qs, bs, 0.0);
  EXPECT_EQ(q.values(), (std::vector<double>{1.0, 2.0, 3.0}));
}

TEST(SgdUpdate, NonFiniteGradientLeavesAllParamsUntouched) {
  Tensor a({2}, {1.0, 1.0});
  Tensor b({2}, {2.0, 2.0});
  const Tensor ga({2}, {0.5, 0.5});
  const Tensor gb({2}, {0.5, std::numeric_limits<double>::quiet_NaN()});
  Tensor* ps[] = {&a, &b};
  const Tensor* gs[] = {&ga, &gb};
  EXPECT_THROW(nn::sgd_update(ps, gs, 0.1), TrainingError);
  EXPECT_EQ(a.values(), (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(b.values(), (std::vector<double>{2.0, 2.0}));
}

TEST(SgdUpdate, InvalidArguments) {
  Tensor a({2});
  const Tensor g({3});
  Tensor* ps[] = {&a};
  const Tensor* gs[] = {&g};
  EXPECT_THROW(nn::sgd_update(ps, gs, 0.1), ShapeError);
  const Tensor g2({2});
  const Tensor* gs2[] = {&g2};
  EXPECT_THROW(nn::sgd_update(ps, gs2, -1.0), ParameterError);
}
