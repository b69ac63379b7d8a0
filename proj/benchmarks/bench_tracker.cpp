#include <benchmark/benchmark.h>

#include "roitrack/controller.hpp"
#include "roitrack/image.hpp"
#include "roitrack/metric.hpp"
#include "roitrack/rng.hpp"

namespace {

using roitrack::BBox;
using roitrack::Rng;
using roitrack::Window;
namespace controller = roitrack::controller;
namespace metric = roitrack::metric;

void BM_CropAndResize(benchmark::State& state) {
  Rng rng(1);
  roitrack::Image frame(640, 480);
  for (float& v : frame.data()) v = static_cast<float>(rng.uniform());
  const Window window{300.5, 200.25, 180.0, 140.0};
  const auto out = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(roitrack::crop_and_resize(frame, window, out));
}
BENCHMARK(BM_CropAndResize)->Arg(56)->Arg(112)->Arg(224);

void BM_ControllerStep(benchmark::State& state) {
  Rng rng(2);
  roitrack::RoiMatrix roi;
  for (double& v : roi.cells) v = rng.uniform();
  const Window window{100.0, 100.0, 80.0, 60.0};
  const controller::ControllerConfig config;
  for (auto _ : state) benchmark::DoNotOptimize(controller::step(window, roi, config));
}
BENCHMARK(BM_ControllerStep);

void BM_RasterizeGt(benchmark::State& state) {
  const BBox box{80.3, 61.7, 40.2, 19.9};
  const Window window{100.0, 70.0, 80.0, 40.0};
  for (auto _ : state) benchmark::DoNotOptimize(metric::rasterize_gt(box, window));
}
BENCHMARK(BM_RasterizeGt);

void BM_HeatmapIou(benchmark::State& state) {
  Rng rng(3);
  const roitrack::GtMatrix truth = metric::rasterize_gt(BBox{80, 60, 40, 20}, Window{100, 70, 80, 40});
  roitrack::RoiMatrix roi;
  for (double& v : roi.cells) v = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(metric::heatmap_iou(truth, roi));
}
BENCHMARK(BM_HeatmapIou);

}  // namespace

BENCHMARK_MAIN();
