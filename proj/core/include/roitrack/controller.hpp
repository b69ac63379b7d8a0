#pragma once

#include <array>

#include "roitrack/geometry.hpp"

// Window control from a RoI matrix: quadrant averaging, re-centering,
// object-size estimation and per-axis window rescaling. Everything here is
// a pure function.
namespace roitrack::controller {

/// 2x2 quadrant means of a RoI matrix: [0][0] top-left, [0][1] top-right,
/// [1][0] bottom-left, [1][1] bottom-right.
using DirectionMatrix = std::array<std::array<double, 2>, 2>;

struct ControllerConfig {
  double grow_threshold = 0.75;
  double shrink_threshold = 0.25;
  double grow_factor = 1.4142135623730951;
  double shrink_factor = 0.7071067811865476;
  double bin_threshold = 0.5;
  /// Minimum summed heatmap mass over all 784 cells to count as a detection.
  double activity_threshold = 2.0;
  double min_w = 16.0;
  double min_h = 16.0;
  double max_w = 1e9;
  double max_h = 1e9;
};

struct Movement {
  double dx = 0.0;
  double dy = 0.0;
  bool lost = false;
};

struct SizeEstimate {
  double obj_w = 0.0;
  double obj_h = 0.0;
  /// Unbinarized sum of the heatmap.
  double mass = 0.0;

  bool empty() const { return obj_w <= 0.0 || obj_h <= 0.0; }
};

struct StepResult {
  Window window;
  SizeEstimate estimate;
  Movement movement;
  bool lost = false;
};

DirectionMatrix direction_matrix(const RoiMatrix& roi);

/// Normalized left/right and top/bottom mass imbalance scaled by w/4 and h/4.
Movement movement(const DirectionMatrix& d, const Window& window,
                  double activity_threshold = ControllerConfig{}.activity_threshold);

SizeEstimate estimate_object_size(const RoiMatrix& roi, const Window& window,
                                  double bin_threshold = ControllerConfig{}.bin_threshold);

/// Rescales each axis independently by the grow/shrink factor when the
/// object/window ratio leaves the band, then clamps to the config bounds.
Window update_window_size(const Window& window, const SizeEstimate& est, const ControllerConfig& config);

/// One control step. A lost frame (too little heatmap mass, or nothing above
/// the binarization threshold) leaves the window where it is.
StepResult step(const Window& window, const RoiMatrix& roi, const ControllerConfig& config);

}  // namespace roitrack::controller
