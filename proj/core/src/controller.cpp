#include "roitrack/controller.hpp"

#include <algorithm>

namespace roitrack::controller {
namespace {

constexpr std::size_t kHalf = kRoiSide / 2;
constexpr double kQuadrantCells = static_cast<double>(kHalf * kHalf);
constexpr double kEpsilon = 1e-9;

double rescale_axis(double size, double object, const ControllerConfig& config) {
  const double ratio = object / size;
  if (ratio > config.grow_threshold) return size * config.grow_factor;
  if (ratio < config.shrink_threshold) return size * config.shrink_factor;
  return size;
}

}  // namespace

// Each quadrant is summed from its outer corner inward, so mirroring the
// matrix maps one quadrant's summation sequence exactly onto another's and
// movement() flips sign without roundoff.
DirectionMatrix direction_matrix(const RoiMatrix& roi) {
  DirectionMatrix d{};
  for (std::size_t qi = 0; qi < 2; ++qi) {
    for (std::size_t qj = 0; qj < 2; ++qj) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kHalf; ++k) {
        const std::size_t r = qi == 0 ? k : kRoiSide - 1 - k;
        for (std::size_t l = 0; l < kHalf; ++l) acc += roi(r, qj == 0 ? l : kRoiSide - 1 - l);
      }
      d[qi][qj] = acc / kQuadrantCells;
    }
  }
  return d;
}

Movement movement(const DirectionMatrix& d, const Window& window, double activity_threshold) {
  const double left = d[0][0] + d[1][0];
  const double right = d[0][1] + d[1][1];
  const double top = d[0][0] + d[0][1];
  const double bottom = d[1][0] + d[1][1];
  // Quadrant means back to a cell sum. The slack absorbs the divide/multiply
  // round trip so a mass of exactly the threshold stays active.
  const double mass = (left + right) * kQuadrantCells;
  if (mass < activity_threshold - 1e-9) return {0.0, 0.0, true};
  const double lambda = window.w / 4.0;
  const double mu = window.h / 4.0;
  return {lambda * (right - left) / (right + left + kEpsilon),
          mu * (bottom - top) / (top + bottom + kEpsilon), false};
}

SizeEstimate estimate_object_size(const RoiMatrix& roi, const Window& window, double bin_threshold) {
  std::size_t max_row = 0;
  std::size_t max_col = 0;
  std::array<std::size_t, kRoiSide> col_sums{};
  double mass = 0.0;
  for (std::size_t r = 0; r < kRoiSide; ++r) {
    std::size_t row_sum = 0;
    for (std::size_t c = 0; c < kRoiSide; ++c) {
      mass += roi(r, c);
      if (roi(r, c) >= bin_threshold) {
        ++row_sum;
        ++col_sums[c];
      }
    }
    max_row = std::max(max_row, row_sum);
  }
  for (std::size_t s : col_sums) max_col = std::max(max_col, s);
  const double side = static_cast<double>(kRoiSide);
  return {static_cast<double>(max_row) / side * window.w, static_cast<double>(max_col) / side * window.h,
          mass};
}

Window update_window_size(const Window& window, const SizeEstimate& est, const ControllerConfig& config) {
  Window out = window;
  out.w = std::clamp(rescale_axis(window.w, est.obj_w, config), config.min_w, config.max_w);
  out.h = std::clamp(rescale_axis(window.h, est.obj_h, config), config.min_h, config.max_h);
  return out;
}

StepResult step(const Window& window, const RoiMatrix& roi, const ControllerConfig& config) {
  StepResult result;
  result.movement = movement(direction_matrix(roi), window, config.activity_threshold);
  result.estimate = estimate_object_size(roi, window, config.bin_threshold);
  if (result.movement.lost || result.estimate.empty()) {
    result.window = window;
    result.lost = true;
    return result;
  }
  Window moved = window;
  moved.cx += result.movement.dx;
  moved.cy += result.movement.dy;
  result.window = update_window_size(moved, result.estimate, config);
  return result;
}

}  // namespace roitrack::controller
