#include <benchmark/benchmark.h>

#include "roitrack/extractor.hpp"
#include "roitrack/nn.hpp"
#include "roitrack/rng.hpp"

namespace {

using roitrack::Rng;
using roitrack::Shape;
using roitrack::Tensor;
namespace extractor = roitrack::extractor;
namespace nn = roitrack::nn;

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

roitrack::Image random_image(std::size_t side, Rng& rng) {
  roitrack::Image img(side, side);
  for (float& v : img.data()) v = static_cast<float>(rng.uniform());
  return img;
}

// Args: input side, in channels, out channels. Stride 2 matches the branch stages.
void BM_Conv2dForward(benchmark::State& state) {
  Rng rng(1);
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto cin = static_cast<std::size_t>(state.range(1));
  const auto cout = static_cast<std::size_t>(state.range(2));
  const Tensor x = random_tensor({cin, side, side}, rng);
  const Tensor k = random_tensor({cout, cin, 3, 3}, rng);
  const Tensor b = random_tensor({cout}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d_forward(x, k, b, 2, 1));
}
BENCHMARK(BM_Conv2dForward)->Args({224, 3, 16})->Args({112, 16, 32})->Args({56, 3, 32})->Args({56, 32, 32});

void BM_Conv2dBackward(benchmark::State& state) {
  Rng rng(2);
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto cin = static_cast<std::size_t>(state.range(1));
  const auto cout = static_cast<std::size_t>(state.range(2));
  const Tensor x = random_tensor({cin, side, side}, rng);
  const Tensor k = random_tensor({cout, cin, 3, 3}, rng);
  const std::size_t out = nn::conv_output_size(side, 3, 2, 1);
  const Tensor up = random_tensor({cout, out, out}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d_backward(x, k, up, 2, 1));
}
BENCHMARK(BM_Conv2dBackward)->Args({224, 3, 16})->Args({112, 16, 32})->Args({56, 3, 32});

void BM_BranchForward(benchmark::State& state) {
  Rng rng(3);
  const auto branch = static_cast<extractor::BranchId>(state.range(0));
  const extractor::ModelParams params = extractor::build_model(1);
  const extractor::TemplateFeatures feats =
      extractor::encode_template(params, random_image(extractor::kTemplateSize, rng));
  const roitrack::Image crop = random_image(extractor::input_size(branch), rng);
  for (auto _ : state) benchmark::DoNotOptimize(extractor::extract_roi_matrix(params, crop, feats, branch));
}
BENCHMARK(BM_BranchForward)
    ->Arg(static_cast<int>(extractor::BranchId::B56))
    ->Arg(static_cast<int>(extractor::BranchId::B112))
    ->Arg(static_cast<int>(extractor::BranchId::B224))
    ->Unit(benchmark::kMillisecond);

void BM_EncodeTemplate(benchmark::State& state) {
  Rng rng(4);
  const extractor::ModelParams params = extractor::build_model(1);
  const roitrack::Image templ = random_image(extractor::kTemplateSize, rng);
  for (auto _ : state) benchmark::DoNotOptimize(extractor::encode_template(params, templ));
}
BENCHMARK(BM_EncodeTemplate);

// One 15-frame training batch on the B56 branch, forward and backward.
void BM_BatchGradientB56(benchmark::State& state) {
  Rng rng(5);
  const extractor::ModelParams params = extractor::build_model(1);
  const roitrack::Image templ = random_image(extractor::kTemplateSize, rng);
  std::vector<extractor::TrainingFrame> frames(15);
  for (extractor::TrainingFrame& f : frames) {
    f.branch = extractor::BranchId::B56;
    f.crop = random_image(56, rng);
    for (double& v : f.target.cells) v = rng.uniform() < 0.25 ? 1.0 : 0.0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(extractor::batch_gradient(params, templ, frames));
}
BENCHMARK(BM_BatchGradientB56)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
